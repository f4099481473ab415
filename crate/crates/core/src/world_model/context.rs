use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::gridworld::Action;

pub const MAX_CONTEXT_LEN: usize = 3;

/// Bounded history of `(code, action)` pairs standing in for the recurrent
/// state. The null context has an empty history and the null flag set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RecurrentContext {
    history: VecDeque<(u32, Action)>,
    max_len: usize,
    null: bool,
}

/// Hashable table key for a non-null context.
pub type ContextKey = Vec<(u32, Action)>;

impl RecurrentContext {
    pub fn null(max_len: usize) -> Self {
        RecurrentContext {
            history: VecDeque::with_capacity(max_len),
            max_len: max_len.max(1),
            null: true,
        }
    }

    pub fn is_null(&self) -> bool {
        self.null
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn history(&self) -> impl Iterator<Item = &(u32, Action)> {
        self.history.iter()
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn key(&self) -> ContextKey {
        self.history.iter().copied().collect()
    }

    /// Pushes `(code, action)`, evicting the oldest pair beyond the bound.
    pub fn update(&self, code: usize, action: Action) -> Self {
        let mut next = self.clone();
        next.history.push_back((code as u32, action));
        while next.history.len() > next.max_len {
            next.history.pop_front();
        }
        next.null = false;
        next
    }
}

pub fn recurrent_update(h: &RecurrentContext, code: usize, action: Action) -> RecurrentContext {
    h.update(code, action)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_update_leaves_null() {
        let h0 = RecurrentContext::null(1);
        assert!(h0.is_null() && h0.is_empty());
        let h = h0.update(4, Action::Forward);
        assert!(!h.is_null());
        assert_eq!(h.key(), vec![(4, Action::Forward)]);
    }

    #[test]
    fn bounded_history_evicts_oldest() {
        let h = RecurrentContext::null(1)
            .update(1, Action::TurnLeft)
            .update(2, Action::Toggle);
        assert_eq!(h.key(), vec![(2, Action::Toggle)]);

        let h3 = RecurrentContext::null(3)
            .update(1, Action::TurnLeft)
            .update(2, Action::Toggle)
            .update(3, Action::Forward)
            .update(4, Action::Pickup);
        assert_eq!(
            h3.key(),
            vec![
                (2, Action::Toggle),
                (3, Action::Forward),
                (4, Action::Pickup)
            ]
        );
    }

    #[test]
    fn equality_follows_history() {
        let a = RecurrentContext::null(1)
            .update(9, Action::Done)
            .update(1, Action::Forward);
        let b = RecurrentContext::null(1).update(1, Action::Forward);
        let c = RecurrentContext::null(1).update(2, Action::Forward);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(RecurrentContext::null(1), b);
    }
}

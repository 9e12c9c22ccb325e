use super::Session;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct Split {
    pub train: Vec<Session>,
    pub validation: Vec<Session>,
    pub test: Vec<Session>,
    /// Empty partitions are reported here rather than failing the split.
    pub warnings: Vec<String>,
}

/// Validation is `val_day`, test is `test_day`, train is every earlier day;
/// sessions after `test_day` (and between the two days) are dropped.
pub fn chronological_split(sessions: &[Session], val_day: i64, test_day: i64) -> Result<Split> {
    if val_day >= test_day {
        return Err(Error::Argument(format!("validation day {val_day} must precede test day {test_day}")));
    }
    let mut split = Split::default();
    for s in sessions {
        if s.day < val_day {
            split.train.push(s.clone());
        } else if s.day == val_day {
            split.validation.push(s.clone());
        } else if s.day == test_day {
            split.test.push(s.clone());
        }
    }
    for (name, part) in [("train", &split.train), ("validation", &split.validation), ("test", &split.test)] {
        if part.is_empty() {
            split.warnings.push(format!("{name} partition is empty"));
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ClickEvent, ItemId, UserId};
    use proptest::prelude::*;

    fn session(id: u64, day: i64) -> Session {
        let click = ClickEvent { item_id: ItemId(1), timestamp: day * 86_400, user_id: UserId(id) };
        Session { session_id: id, user_id: UserId(id), clicks: vec![click], label: false, day }
    }

    #[test]
    fn three_days() {
        let s: Vec<Session> = (1..=3).map(|d| session(d as u64, d)).collect();
        let split = chronological_split(&s, 2, 3).unwrap();
        assert_eq!(split.train.len(), 1);
        assert_eq!(split.train[0].day, 1);
        assert_eq!(split.validation[0].day, 2);
        assert_eq!(split.test[0].day, 3);
        assert!(split.warnings.is_empty());
        assert!(chronological_split(&s, 3, 3).is_err());
    }

    #[test]
    fn empty_validation_warns() {
        let s = vec![session(1, 1), session(2, 3)];
        let split = chronological_split(&s, 2, 3).unwrap();
        assert!(split.validation.is_empty());
        assert_eq!(split.warnings, vec!["validation partition is empty".to_string()]);
    }

    proptest! {
        #[test]
        fn partitions_sessions_up_to_test_day(days in proptest::collection::vec(0i64..10, 0..80), val in 0i64..9) {
            let test = val + 1;
            let s: Vec<Session> = days.iter().enumerate().map(|(i, &d)| session(i as u64, d)).collect();
            let split = chronological_split(&s, val, test).unwrap();
            let mut seen: Vec<u64> = split.train.iter().chain(&split.validation).chain(&split.test).map(|x| x.session_id).collect();
            let n = seen.len();
            seen.sort();
            seen.dedup();
            prop_assert_eq!(seen.len(), n);
            let expected: Vec<u64> = s.iter().filter(|x| x.day <= test).map(|x| x.session_id).collect();
            prop_assert_eq!(seen, expected);
        }
    }
}

use serde::Serialize;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SuiteError {
    #[error("no tasks to aggregate")]
    EmptyInput,
    #[error("task {task} has {found} attempts, expected {expected}")]
    RaggedAttempts { task: usize, expected: usize, found: usize },
    #[error("{found} validity flags for {expected} tasks")]
    ValidityMismatch { expected: usize, found: usize },
}

/// Per-task attempt outcomes and the derived rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub outcomes: Vec<Vec<bool>>,
    pub attempts: usize,
    pub bt_valid_rate: f64,
    pub sr: f64,
    pub pass_at_k: f64,
}

/// Aggregates `k` attempt outcomes per task.
///
/// `sr` counts tasks whose first attempt succeeded, `pass_at_k` those with
/// any success, and `bt_valid_rate` the tasks whose first output was a valid
/// tree (`first_valid[i]`).
pub fn aggregate_suite(outcomes: &[Vec<bool>], first_valid: &[bool]) -> Result<SuiteResult, SuiteError> {
    let k = outcomes.first().ok_or(SuiteError::EmptyInput)?.len();
    if k == 0 {
        return Err(SuiteError::RaggedAttempts {
            task: 0,
            expected: 1,
            found: 0,
        });
    }
    if let Some((task, o)) = outcomes.iter().enumerate().find(|(_, o)| o.len() != k) {
        return Err(SuiteError::RaggedAttempts {
            task,
            expected: k,
            found: o.len(),
        });
    }
    if first_valid.len() != outcomes.len() {
        return Err(SuiteError::ValidityMismatch {
            expected: outcomes.len(),
            found: first_valid.len(),
        });
    }
    let n = outcomes.len() as f64;
    let frac = |count: usize| count as f64 / n;
    Ok(SuiteResult {
        attempts: k,
        bt_valid_rate: frac(first_valid.iter().filter(|v| **v).count()),
        sr: frac(outcomes.iter().filter(|o| o[0]).count()),
        pass_at_k: frac(outcomes.iter().filter(|o| o.iter().any(|s| *s)).count()),
        outcomes: outcomes.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirteen_then_fourteen_of_fifteen() {
        let mut outcomes = vec![vec![true, true, true]; 13];
        outcomes.push(vec![false, true, false]);
        outcomes.push(vec![false, false, false]);
        let r = aggregate_suite(&outcomes, &[true; 15]).unwrap();
        assert_eq!((r.sr * 100.0).round(), 87.0);
        assert_eq!((r.pass_at_k * 100.0).round(), 93.0);
        assert_eq!(r.bt_valid_rate, 1.0);
    }

    #[test]
    fn zero_and_single_attempt_cases() {
        let r = aggregate_suite(&[vec![false; 3], vec![false; 3]], &[false, false]).unwrap();
        assert_eq!((r.sr, r.pass_at_k, r.bt_valid_rate), (0.0, 0.0, 0.0));
        let r = aggregate_suite(&[vec![true], vec![false], vec![true]], &[true; 3]).unwrap();
        assert_eq!(r.sr, r.pass_at_k);
    }

    #[test]
    fn input_errors() {
        assert_eq!(aggregate_suite(&[], &[]).unwrap_err(), SuiteError::EmptyInput);
        assert!(matches!(
            aggregate_suite(&[vec![true; 3], vec![true; 2]], &[true; 2]),
            Err(SuiteError::RaggedAttempts { task: 1, .. })
        ));
        assert!(matches!(
            aggregate_suite(&[vec![true]], &[]),
            Err(SuiteError::ValidityMismatch { .. })
        ));
    }
}

//! Scoreboard for the acceptance target: runs each criterion, enforces its
//! runtime budget and prints one PASS/FAIL line per criterion.

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

/// Detail on success, reason on failure.
pub type Verdict = Result<String, String>;

/// Returns `Err(format!(..))` from the enclosing function unless `cond` holds.
#[macro_export]
macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

#[derive(Debug, Clone, Copy)]
pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub budget: Option<Duration>,
}

impl Criterion {
    pub const fn new(id: u8, title: &'static str) -> Self {
        Self { id, title, budget: None }
    }

    pub const fn within(self, budget: Duration) -> Self {
        Self {
            budget: Some(budget),
            ..self
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub criterion: Criterion,
    pub elapsed: Duration,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "criterion {} {verdict} {} [{:.2} s] {}",
            self.criterion.id,
            self.criterion.title,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

#[derive(Debug, Default)]
pub struct Scoreboard {
    outcomes: Vec<Outcome>,
}

impl Scoreboard {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `check`, turning a panic into a failure and an overrun budget into
    /// a failure, then prints the outcome line.
    pub fn run(&mut self, criterion: Criterion, check: impl FnOnce() -> Verdict) -> &Outcome {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| Err(panic_message(&*p)));
        let elapsed = start.elapsed();
        let outcome = judge(criterion, elapsed, verdict);
        println!("{outcome}");
        self.outcomes.push(outcome);
        self.outcomes.last().expect("just pushed")
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn summary(&self) -> String {
        let passed = self.outcomes.iter().filter(|o| o.passed).count();
        format!("acceptance: {passed}/{} criteria passed", self.outcomes.len())
    }
}

fn judge(criterion: Criterion, elapsed: Duration, verdict: Verdict) -> Outcome {
    let (passed, detail) = match (verdict, criterion.budget) {
        (Ok(_), Some(budget)) if elapsed > budget => (
            false,
            format!("runtime {:.2} s exceeds {:.2} s", elapsed.as_secs_f64(), budget.as_secs_f64()),
        ),
        (Ok(detail), _) => (true, detail),
        (Err(reason), _) => (false, reason),
    };
    Outcome {
        criterion,
        elapsed,
        passed,
        detail,
    }
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    let text = payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "non-string panic".into());
    format!("panicked: {text}")
}

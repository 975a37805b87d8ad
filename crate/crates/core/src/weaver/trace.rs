use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConditionOutcome {
    True,
    False,
    Skipped(String),
}

impl fmt::Display for ConditionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionOutcome::True => f.write_str("true"),
            ConditionOutcome::False => f.write_str("false"),
            ConditionOutcome::Skipped(reason) => write!(f, "skipped:{reason}"),
        }
    }
}

/// What happened to one binding during weaving.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub strategy: String,
    pub binding: usize,
    pub condition: ConditionOutcome,
    pub applied: bool,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "strategy={} binding={} condition={} applied={}",
            self.strategy, self.binding, self.condition, self.applied
        )
    }
}

/// One record per binding considered, in strategy then declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WeaveTrace {
    pub records: Vec<TraceRecord>,
}

impl WeaveTrace {
    pub fn applied(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.applied)
    }

    pub fn lines(&self) -> Vec<String> {
        self.records.iter().map(ToString::to_string).collect()
    }
}

impl fmt::Display for WeaveTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.records {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

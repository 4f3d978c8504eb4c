use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-step regret of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub instantaneous: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl RegretTrace {
    pub fn from_instantaneous(instantaneous: Vec<f64>, seed: u64) -> Self {
        let cumulative = instantaneous
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect();
        Self {
            instantaneous,
            cumulative,
            seed,
            metadata: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.instantaneous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instantaneous.is_empty()
    }

    /// Cumulative regret after `steps` steps.
    pub fn total_at(&self, steps: usize) -> Option<f64> {
        match steps {
            0 => Some(0.0),
            t => self.cumulative.get(t - 1).copied(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_owned(), value.to_string());
        self
    }

    /// Tab-separated `step instantaneous cumulative` rows, steps from 1,
    /// after `# key: value` metadata lines.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# seed: {}", self.seed)?;
        for (k, v) in &self.metadata {
            writeln!(w, "# {k}: {v}")?;
        }
        writeln!(w, "step\tinstantaneous\tcumulative")?;
        for (t, (i, c)) in self.instantaneous.iter().zip(&self.cumulative).enumerate() {
            writeln!(w, "{}\t{i}\t{c}", t + 1)?;
        }
        Ok(())
    }
}

/// `100 (cold - pretrained) / cold` on cumulative regret after `steps`
/// steps. `None` when the cold-start regret is zero.
pub fn regret_reduction(pretrained: &RegretTrace, cold: &RegretTrace, steps: usize) -> Result<Option<f64>> {
    let short = |t: &RegretTrace| Error::Usage(format!("trace of length {} is shorter than {steps}", t.len()));
    if steps == 0 {
        return Ok(None);
    }
    let p = pretrained.total_at(steps).ok_or_else(|| short(pretrained))?;
    let c = cold.total_at(steps).ok_or_else(|| short(cold))?;
    if c == 0.0 {
        return Ok(None);
    }
    Ok(Some(100.0 * (c - p) / c))
}

/// Pointwise mean and sample variance of cumulative regret across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSummary {
    pub runs: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl RegretSummary {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# runs: {}", self.runs)?;
        writeln!(w, "step\tmean\tvariance")?;
        for (t, (m, v)) in self.mean.iter().zip(&self.variance).enumerate() {
            writeln!(w, "{}\t{m}\t{v}", t + 1)?;
        }
        Ok(())
    }
}

pub fn aggregate_runs(traces: &[RegretTrace]) -> Result<RegretSummary> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Usage("cannot aggregate zero runs".into()))?;
    let len = first.len();
    if traces.iter().any(|t| t.len() != len) {
        return Err(Error::Usage("traces have different lengths".into()));
    }
    let n = traces.len() as f64;
    let mut mean = vec![0.0; len];
    let mut variance = vec![0.0; len];
    for t in 0..len {
        let m = traces.iter().map(|tr| tr.cumulative[t]).sum::<f64>() / n;
        mean[t] = m;
        if traces.len() > 1 {
            variance[t] = traces.iter().map(|tr| (tr.cumulative[t] - m).powi(2)).sum::<f64>() / (n - 1.0);
        }
    }
    Ok(RegretSummary {
        runs: traces.len(),
        mean,
        variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(total: f64) -> RegretTrace {
        RegretTrace::from_instantaneous(vec![total / 4.0; 4], 0)
    }

    #[test]
    fn prefix_sums() {
        let t = RegretTrace::from_instantaneous(vec![1.0, 0.0, 0.5], 3);
        assert_eq!(t.cumulative, vec![1.0, 1.0, 1.5]);
        assert_eq!(t.total_at(0), Some(0.0));
        assert_eq!(t.total_at(3), Some(1.5));
        assert_eq!(t.total_at(4), None);
    }

    #[test]
    fn reductions() {
        assert_eq!(regret_reduction(&flat(80.0), &flat(100.0), 4).unwrap(), Some(20.0));
        assert_eq!(regret_reduction(&flat(100.0), &flat(100.0), 4).unwrap(), Some(0.0));
        assert_eq!(regret_reduction(&flat(1.0), &flat(0.0), 4).unwrap(), None);
        assert!(regret_reduction(&flat(1.0), &flat(1.0), 5).is_err());
    }

    #[test]
    fn aggregation() {
        let same = vec![flat(4.0); 10];
        let s = aggregate_runs(&same).unwrap();
        assert!(s.variance.iter().all(|&v| v == 0.0));
        let a = RegretTrace::from_instantaneous(vec![0.0, 1.0, 1.0], 0);
        let b = RegretTrace::from_instantaneous(vec![2.0, 1.0, 1.0], 1);
        let s = aggregate_runs(&[a, b]).unwrap();
        assert_eq!(s.mean, vec![1.0, 2.0, 3.0]);
        assert_eq!(s.variance, vec![2.0, 2.0, 2.0]);
        assert!(aggregate_runs(&[]).is_err());
    }

    #[test]
    fn tsv_export() {
        let mut buf = Vec::new();
        flat(2.0).with_meta("policy", "linucb").write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# seed: 0\n# policy: linucb\nstep\tinstantaneous\tcumulative\n1\t0.5\t0.5\n"));
    }
}

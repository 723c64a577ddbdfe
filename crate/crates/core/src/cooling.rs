//! Cooling schedules: the resampling times τ(k), gaps T_k, the inverse k(n)
//! and the remainder clocks around a time n.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The shape of τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// τ(k) = max(τ(k-1) + 1, k, ⌊B k^β⌋); gaps grow like βB k^{β-1}.
    Polynomial {
        #[serde(rename = "B")]
        b: f64,
        beta: f64,
    },
    /// T_k = max(1, round(e^{Ck})); log T_k grows like Ck.
    Exponential {
        #[serde(rename = "C")]
        c: f64,
    },
    /// τ(k) = k: resample before every step.
    Unit,
    /// Explicit τ(1) < τ(2) < ...
    Explicit { times: Vec<u64> },
}

/// Which limit theorem a schedule falls under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime")]
pub enum Regime {
    /// Slow (polynomial) cooling.
    R1 { b: f64, beta: f64 },
    /// Fast (exponential) cooling.
    R2 { c: f64 },
}

/// A cooling map with a memoized table of resampling times.
#[derive(Debug, Clone, PartialEq)]
pub struct CoolingSchedule {
    kind: ScheduleKind,
    // taus[k] = τ(k); taus[0] = 0.
    taus: Vec<u64>,
}

impl CoolingSchedule {
    pub fn new(kind: ScheduleKind) -> Result<Self> {
        match &kind {
            ScheduleKind::Polynomial { b, beta } => {
                if !(*b > 0.0) || !b.is_finite() {
                    return Err(Error::InvalidSchedule(format!("B = {b} must be positive")));
                }
                if !(*beta > 1.0) || !beta.is_finite() {
                    return Err(Error::InvalidSchedule(format!("β must exceed 1, got {beta}")));
                }
            }
            ScheduleKind::Exponential { c } => {
                if !(*c > 0.0) || !c.is_finite() {
                    return Err(Error::InvalidSchedule(format!("C = {c} must be positive")));
                }
            }
            ScheduleKind::Unit => {}
            ScheduleKind::Explicit { times } => {
                let mut prev = 0;
                for (i, &t) in times.iter().enumerate() {
                    let k = i as u64 + 1;
                    if t <= prev {
                        return Err(Error::InvalidSchedule(format!(
                            "explicit times must be strictly increasing: tau({k}) = {t} after {prev}"
                        )));
                    }
                    if t < k {
                        return Err(Error::InvalidSchedule(format!(
                            "tau({k}) = {t} violates tau(k) >= k"
                        )));
                    }
                    prev = t;
                }
            }
        }
        Ok(CoolingSchedule {
            kind,
            taus: vec![0],
        })
    }

    pub fn polynomial(b: f64, beta: f64) -> Result<Self> {
        Self::new(ScheduleKind::Polynomial { b, beta })
    }

    pub fn exponential(c: f64) -> Result<Self> {
        Self::new(ScheduleKind::Exponential { c })
    }

    pub fn unit() -> Self {
        Self::new(ScheduleKind::Unit).expect("unit schedule is valid")
    }

    pub fn explicit(times: Vec<u64>) -> Result<Self> {
        Self::new(ScheduleKind::Explicit { times })
    }

    /// Parses one τ(k) per line (k = 1, 2, ...). Blank lines and `#` comments
    /// are skipped.
    pub fn parse_explicit(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let t = line.parse::<u64>().map_err(|e| {
                Error::InvalidSchedule(format!("line {}: {e}: {line:?}", lineno + 1))
            })?;
            times.push(t);
        }
        Self::explicit(times)
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn regime(&self) -> Option<Regime> {
        match self.kind {
            ScheduleKind::Polynomial { b, beta } => Some(Regime::R1 { b, beta }),
            ScheduleKind::Exponential { c } => Some(Regime::R2 { c }),
            _ => None,
        }
    }

    /// τ(k) computed from τ(k-1) without the memo.
    fn next_tau(&self, prev: u64, k: u64) -> Result<u64> {
        match &self.kind {
            ScheduleKind::Unit => Ok(k),
            ScheduleKind::Polynomial { b, beta } => {
                let raw = b * (k as f64).powf(*beta);
                if !(raw < 9.0e18) {
                    return Err(Error::Overflow(k));
                }
                let floor = raw.floor() as u64;
                let step = prev.checked_add(1).ok_or(Error::Overflow(k))?;
                Ok(step.max(k).max(floor))
            }
            ScheduleKind::Exponential { c } => {
                let raw = (c * k as f64).exp();
                if !(raw < 9.0e18) {
                    return Err(Error::Overflow(k));
                }
                let gap = (raw.round() as u64).max(1);
                prev.checked_add(gap).ok_or(Error::Overflow(k))
            }
            ScheduleKind::Explicit { times } => times
                .get(k as usize - 1)
                .copied()
                .ok_or(Error::ScheduleExhausted(prev)),
        }
    }

    /// Extends the memo until it contains the first resampling time strictly
    /// after `horizon`, so every query up to `horizon` is a table lookup.
    pub fn prepare(&mut self, horizon: u64) -> Result<()> {
        while *self.taus.last().expect("tau(0)") <= horizon {
            let k = self.taus.len() as u64;
            let prev = *self.taus.last().expect("tau(0)");
            let next = self.next_tau(prev, k)?;
            self.taus.push(next);
        }
        Ok(())
    }

    /// Builder form of [`prepare`](Self::prepare).
    pub fn prepared(mut self, horizon: u64) -> Result<Self> {
        self.prepare(horizon)?;
        Ok(self)
    }

    /// Largest horizon for which every query is a table lookup.
    pub fn covered_horizon(&self) -> u64 {
        self.taus.last().expect("tau(0)").saturating_sub(1)
    }

    /// The memoized times `τ(0), τ(1), ...`.
    pub fn times(&self) -> &[u64] {
        &self.taus
    }

    /// τ(k).
    pub fn tau(&self, k: u64) -> Result<u64> {
        if let Some(&t) = self.taus.get(k as usize) {
            return Ok(t);
        }
        let mut j = self.taus.len() as u64;
        let mut t = *self.taus.last().expect("tau(0)");
        while j <= k {
            t = self.next_tau(t, j)?;
            j += 1;
        }
        Ok(t)
    }

    /// T_k = τ(k) - τ(k-1), for k >= 1.
    pub fn gap(&self, k: u64) -> Result<u64> {
        if k == 0 {
            return Err(Error::domain("gap T_k is defined for k >= 1"));
        }
        Ok(self.tau(k)? - self.tau(k - 1)?)
    }

    /// k(n) = max{k : τ(k) <= n}.
    pub fn k_of_n(&self, n: u64) -> Result<u64> {
        let last = *self.taus.last().expect("tau(0)");
        if n < last {
            // taus is strictly increasing with taus[0] = 0 <= n.
            return Ok(self.taus.partition_point(|&t| t <= n) as u64 - 1);
        }
        if let ScheduleKind::Unit = self.kind {
            return Ok(n);
        }
        let mut k = self.taus.len() as u64 - 1;
        let mut t = last;
        loop {
            let next = self.next_tau(t, k + 1)?;
            if next > n {
                return Ok(k);
            }
            k += 1;
            t = next;
        }
    }

    /// (T̄_n, T̄_n^c) = (n - τ(k(n)), τ(k(n)+1) - n).
    pub fn remainders(&self, n: u64) -> Result<(u64, u64)> {
        let k = self.k_of_n(n)?;
        Ok((n - self.tau(k)?, self.tau(k + 1)? - n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_values() {
        let s = CoolingSchedule::polynomial(1.0, 2.0).unwrap();
        assert_eq!(s.tau(3).unwrap(), 9);
        assert_eq!(s.gap(3).unwrap(), 5);
        assert_eq!(s.k_of_n(10).unwrap(), 3);
        assert_eq!(s.remainders(10).unwrap(), (1, 6));
        assert_eq!(s.remainders(9).unwrap(), (0, 7));
        assert_eq!(s.k_of_n(0).unwrap(), 0);
    }

    #[test]
    fn unit_values() {
        let s = CoolingSchedule::unit();
        for k in 0..50 {
            assert_eq!(s.tau(k).unwrap(), k);
            assert_eq!(s.k_of_n(k).unwrap(), k);
            assert_eq!(s.remainders(k).unwrap(), (0, 1));
            if k > 0 {
                assert_eq!(s.gap(k).unwrap(), 1);
            }
        }
    }

    #[test]
    fn exponential_values() {
        let s = CoolingSchedule::exponential(1.0).unwrap();
        assert_eq!(s.gap(1).unwrap(), 3);
        assert_eq!(s.gap(2).unwrap(), 7);
        assert_eq!(s.gap(3).unwrap(), 20);
        assert_eq!(s.tau(3).unwrap(), 30);
    }

    #[test]
    fn before_first_refresh() {
        let s = CoolingSchedule::explicit(vec![5, 9]).unwrap();
        for n in 0..5 {
            assert_eq!(s.k_of_n(n).unwrap(), 0);
        }
        assert_eq!(s.k_of_n(5).unwrap(), 1);
        assert!(matches!(s.k_of_n(9), Err(Error::ScheduleExhausted(_))));
    }

    #[test]
    fn small_b_still_strict() {
        let s = CoolingSchedule::polynomial(0.01, 1.5).unwrap();
        for k in 1..200 {
            assert!(s.tau(k).unwrap() >= k);
            assert!(s.gap(k).unwrap() >= 1);
        }
    }

    #[test]
    fn overflow_reported() {
        let s = CoolingSchedule::exponential(1.0).unwrap();
        assert!(matches!(s.tau(60), Err(Error::Overflow(_))));
        let p = CoolingSchedule::polynomial(1.0, 3.0).unwrap();
        assert!(matches!(p.tau(10_000_000), Err(Error::Overflow(_))));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(CoolingSchedule::polynomial(1.0, 1.0).is_err());
        assert!(CoolingSchedule::polynomial(0.0, 2.0).is_err());
        assert!(CoolingSchedule::exponential(-1.0).is_err());
        assert!(CoolingSchedule::explicit(vec![3, 3]).is_err());
        assert!(CoolingSchedule::explicit(vec![1, 1]).is_err());
    }

    #[test]
    fn parse_explicit_file() {
        let s = CoolingSchedule::parse_explicit("# taus\n2\n5\n\n11\n").unwrap();
        assert_eq!(s.tau(2).unwrap(), 5);
        assert!(CoolingSchedule::parse_explicit("2\nx\n").is_err());
    }

    #[test]
    fn prepared_lookup_agrees() {
        let lazy = CoolingSchedule::polynomial(2.5, 1.7).unwrap();
        let table = lazy.clone().prepared(100_000).unwrap();
        for n in (0..100_000).step_by(997) {
            assert_eq!(lazy.k_of_n(n).unwrap(), table.k_of_n(n).unwrap());
        }
        assert!(table.covered_horizon() >= 100_000);
    }
}

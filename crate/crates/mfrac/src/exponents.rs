//! Exponent bookkeeping. Everything is exact rational arithmetic so the
//! homogeneity relation and the hypothesis checks of the experiments are
//! decided without floating error.

use crate::geometry::{rat_to_f64, Rat};
use crate::{Error, Result};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

/// Whether the exponents are tied by homogeneity or only by `p <= q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightMode {
    /// `1/p_1 + ... + 1/p_m = 1/q + alpha/n`.
    Homogeneous,
    /// Only `p <= q` (for the two-weight characteristic).
    TwoWeight,
}

/// Dimensions, order, and Lebesgue exponents of one operator setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentData {
    n: u32,
    alpha: Rat,
    p: Vec<Rat>,
    q: Rat,
    mode: WeightMode,
}

impl ExponentData {
    /// Homogeneous setup with `q` derived from the relation.
    pub fn homogeneous(n: u32, alpha: Rat, p: Vec<Rat>) -> Result<Self> {
        Self::validate_common(n, alpha, &p)?;
        let inv_q = p.iter().map(|pi| pi.recip()).sum::<Rat>() - alpha / n as i128;
        if inv_q <= Rat::zero() {
            return Err(Error::InvalidExponents(format!(
                "homogeneity gives 1/q = {inv_q} <= 0"
            )));
        }
        Ok(ExponentData { n, alpha, p, q: inv_q.recip(), mode: WeightMode::Homogeneous })
    }

    /// Homogeneous setup with `q` supplied; the relation is checked exactly.
    pub fn homogeneous_with_q(n: u32, alpha: Rat, p: Vec<Rat>, q: Rat) -> Result<Self> {
        let e = Self::homogeneous(n, alpha, p)?;
        if e.q != q {
            return Err(Error::InvalidExponents(format!(
                "q = {q} violates 1/p_1 + ... + 1/p_m = 1/q + alpha/n (expected q = {})",
                e.q
            )));
        }
        Ok(e)
    }

    /// Two-weight setup: homogeneity is dropped, only `p <= q` is required.
    pub fn two_weight(n: u32, alpha: Rat, p: Vec<Rat>, q: Rat) -> Result<Self> {
        Self::validate_common(n, alpha, &p)?;
        if q <= Rat::zero() {
            return Err(Error::InvalidExponents("q must be positive".into()));
        }
        let p_harm = p.iter().map(|pi| pi.recip()).sum::<Rat>().recip();
        if p_harm > q {
            return Err(Error::InvalidExponents(format!(
                "two-weight mode needs p <= q, got p = {p_harm}, q = {q}"
            )));
        }
        Ok(ExponentData { n, alpha, p, q, mode: WeightMode::TwoWeight })
    }

    fn validate_common(n: u32, alpha: Rat, p: &[Rat]) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidExponents("n must be >= 1".into()));
        }
        if p.is_empty() {
            return Err(Error::InvalidExponents("need at least one exponent".into()));
        }
        let mn = Rat::from_integer((p.len() as u32 * n) as i128);
        if alpha < Rat::zero() || alpha >= mn {
            return Err(Error::InvalidExponents(format!(
                "alpha = {alpha} outside [0, mn) = [0, {mn})"
            )));
        }
        for pi in p {
            if *pi <= Rat::one() {
                return Err(Error::InvalidExponents(format!("p = {pi} must exceed 1")));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> usize {
        self.p.len()
    }

    pub fn alpha(&self) -> Rat {
        self.alpha
    }

    pub fn q(&self) -> Rat {
        self.q
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    pub fn p(&self, i: usize) -> Rat {
        self.p[i]
    }

    pub fn ps(&self) -> &[Rat] {
        &self.p
    }

    /// Conjugate exponent `p_i' = p_i / (p_i - 1)`.
    pub fn p_conj(&self, i: usize) -> Rat {
        let pi = self.p[i];
        pi / (pi - 1)
    }

    /// Conjugate of `q`; only defined for `q > 1`.
    pub fn q_conj(&self) -> Result<Rat> {
        if self.q <= Rat::one() {
            return Err(Error::InvalidExponents(format!(
                "q' undefined for q = {} <= 1",
                self.q
            )));
        }
        Ok(self.q / (self.q - 1))
    }

    /// Harmonic combination `1/p = sum 1/p_i`.
    pub fn p_harmonic(&self) -> Rat {
        self.p.iter().map(|pi| pi.recip()).sum::<Rat>().recip()
    }

    pub fn alpha_over_n(&self) -> Rat {
        self.alpha / self.n as i128
    }

    pub fn max_p_conj(&self) -> Rat {
        (0..self.m()).map(|i| self.p_conj(i)).max().unwrap()
    }

    pub fn argmax_p_conj(&self) -> usize {
        (0..self.m()).max_by_key(|&i| self.p_conj(i)).unwrap()
    }

    /// Exponent set for the duality swap at slot `i`: `p_i` becomes `q'` and
    /// the target exponent becomes `p_i'`. Requires `q > 1`.
    pub fn dual(&self, i: usize) -> Result<ExponentData> {
        let qc = self.q_conj()?;
        let mut p = self.p.clone();
        let target = self.p_conj(i);
        p[i] = qc;
        ExponentData::homogeneous_with_q(self.n, self.alpha, p, target)
    }

    /// Stopping ratio `2^{(m - alpha/n)(n + 1)}` of the level-set construction.
    pub fn stopping_ratio(&self) -> f64 {
        let e = (Rat::from_integer(self.m() as i128) - self.alpha_over_n())
            * Rat::from_integer((self.n + 1) as i128);
        2f64.powf(rat_to_f64(e))
    }

    pub fn alpha_f64(&self) -> f64 {
        rat_to_f64(self.alpha)
    }

    pub fn q_f64(&self) -> f64 {
        rat_to_f64(self.q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rat;

    #[test]
    fn derives_q_by_homogeneity() {
        // n=1, m=2, p=(4/3,4), alpha=1/2: 3/4 + 1/4 = 1/q + 1/2 => q = 2.
        let e = ExponentData::homogeneous(1, rat(1, 2), vec![rat(4, 3), rat(4, 1)]).unwrap();
        assert_eq!(e.q(), rat(2, 1));
        assert_eq!(e.p_conj(0), rat(4, 1));
        assert_eq!(e.p_conj(1), rat(4, 3));
        assert_eq!(e.p_harmonic(), rat(1, 1));
        assert_eq!(e.max_p_conj(), rat(4, 1));
        assert_eq!(e.argmax_p_conj(), 0);
    }

    #[test]
    fn rejects_inconsistent_q() {
        let err = ExponentData::homogeneous_with_q(1, rat(1, 2), vec![rat(2, 1), rat(2, 1)], rat(3, 1));
        assert!(err.is_err());
    }

    #[test]
    fn two_weight_needs_p_le_q() {
        assert!(ExponentData::two_weight(1, rat(1, 2), vec![rat(2, 1)], rat(1, 4)).is_err());
        let e = ExponentData::two_weight(1, rat(1, 2), vec![rat(2, 1)], rat(3, 1)).unwrap();
        assert_eq!(e.mode(), WeightMode::TwoWeight);
    }

    #[test]
    fn dual_exponents_stay_homogeneous() {
        let e = ExponentData::homogeneous(1, rat(1, 2), vec![rat(4, 3), rat(4, 1)]).unwrap();
        let d = e.dual(0).unwrap();
        assert_eq!(d.q(), rat(4, 1)); // p_0' = 4
        assert_eq!(d.p(0), rat(2, 1)); // q' = 2
        assert_eq!(d.p(1), rat(4, 1));
        // q <= 1 has no conjugate
        let e1 = ExponentData::homogeneous(1, rat(1, 2), vec![rat(4, 3), rat(4, 3)]).unwrap();
        assert_eq!(e1.q(), rat(1, 1));
        assert!(e1.dual(0).is_err());
    }

    #[test]
    fn stopping_ratio_is_exact_for_common_cases() {
        let e = ExponentData::homogeneous(1, rat(0, 1), vec![rat(2, 1)]).unwrap();
        assert_eq!(e.stopping_ratio(), 4.0); // m=1, alpha=0, n=1
        let e = ExponentData::homogeneous(1, rat(1, 2), vec![rat(4, 3), rat(4, 1)]).unwrap();
        assert_eq!(e.stopping_ratio(), 8.0); // (2 - 1/2) * 2 = 3
    }
}

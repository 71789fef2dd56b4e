//! Two-way mixed (split-plot) ANOVA: one between-subjects factor (group),
//! one within-subjects factor (time).
//!
//! Sums of squares, with GM the grand mean, ȳ_i subject means, ȳ_g group
//! means, ȳ_t time means and ȳ_gt cell means:
//!
//! ```text
//! SS_group   = k Σ_g n_g (ȳ_g - GM)²                    df g-1
//! SS_subj    = k Σ_i (ȳ_i - ȳ_g(i))²                    df N-g
//! SS_time    = N Σ_t (ȳ_t - GM)²                        df k-1
//! SS_txg     = Σ_g n_g Σ_t (ȳ_gt - GM)² - SS_group - SS_time
//!                                                      df (k-1)(g-1)
//! SS_error   = Σ_i Σ_t (y_it - ȳ_i - ȳ_gt + ȳ_g)²       df (k-1)(N-g)
//! ```
//!
//! Group sizes may differ. Every subject has all k values, so the time and
//! interaction terms stay orthogonal to the between-subjects part; the group
//! term uses size-weighted means (the sequential, group-first partition).
//!
//! Sphericity is judged on orthonormal Helmert contrasts of the time values,
//! with their covariance pooled within groups (df N-g).

use nalgebra::DMatrix;

use crate::error::StatsError;
use crate::stats::dataset::StudyDataset;
use crate::stats::distributions::{chi2_p_value, f_p_value};

/// ε_GG at or below this picks Greenhouse-Geisser under the auto policy.
pub const GG_THRESHOLD: f64 = 0.75;
pub const SPHERICITY_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effect {
    Time,
    Group,
    TimeByGroup,
}

impl Effect {
    pub fn label(self) -> &'static str {
        match self {
            Effect::Time => "Time",
            Effect::Group => "Group",
            Effect::TimeByGroup => "Time x Group",
        }
    }

    pub fn is_within(self) -> bool {
        self != Effect::Group
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correction {
    None,
    GreenhouseGeisser,
    HuynhFeldt,
}

impl Correction {
    pub fn label(self) -> &'static str {
        match self {
            Correction::None => "none",
            Correction::GreenhouseGeisser => "Greenhouse-Geisser",
            Correction::HuynhFeldt => "Huynh-Feldt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectionPolicy {
    /// Correct only when Mauchly's test rejects sphericity at .05; then GG if
    /// ε_GG ≤ 0.75, else HF.
    Auto,
    None,
    GreenhouseGeisser,
    HuynhFeldt,
}

impl std::str::FromStr for CorrectionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(CorrectionPolicy::Auto),
            "none" => Ok(CorrectionPolicy::None),
            "gg" | "greenhouse-geisser" => Ok(CorrectionPolicy::GreenhouseGeisser),
            "hf" | "huynh-feldt" => Ok(CorrectionPolicy::HuynhFeldt),
            _ => Err(format!("unknown correction `{s}` (auto, none, gg, hf)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectRow {
    pub effect: Effect,
    pub ss: f64,
    /// Degrees of freedom after any correction.
    pub df1: f64,
    pub df2: f64,
    pub ms: f64,
    pub f: f64,
    pub p: f64,
    pub eta_p2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partition {
    pub total: f64,
    pub group: f64,
    pub subjects_within_groups: f64,
    pub time: f64,
    pub time_by_group: f64,
    pub within_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MauchlyTest {
    pub w: f64,
    pub chi2: f64,
    pub df: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphericity {
    pub epsilon_gg: f64,
    pub epsilon_hf: f64,
    /// `None` for two time levels (sphericity holds trivially) or when the
    /// contrast covariance is singular.
    pub mauchly: Option<MauchlyTest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedAnovaTable {
    /// Time, Group, Time × Group, in that order.
    pub rows: [EffectRow; 3],
    pub ss: Partition,
    pub df_subjects_within_groups: f64,
    pub df_within_error: f64,
    pub ms_subjects_within_groups: f64,
    pub ms_within_error: f64,
    /// `None` when the contrasts carry no variance at all.
    pub sphericity: Option<Sphericity>,
    pub correction: Correction,
    pub n_subjects: usize,
    pub n_groups: usize,
    pub n_levels: usize,
}

impl MixedAnovaTable {
    pub fn row(&self, effect: Effect) -> &EffectRow {
        self.rows.iter().find(|r| r.effect == effect).expect("all effects present")
    }
}

/// ηp² recovered from a reported F and its degrees of freedom.
pub fn partial_eta_sq_from_f(f: f64, df1: f64, df2: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    df1 * f / (df1 * f + df2)
}

/// Orthonormal Helmert contrasts, (k-1) × k.
pub fn helmert_contrasts(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k - 1, k, |r, c| {
        let j = r + 1;
        let norm = ((j * (j + 1)) as f64).sqrt();
        if c < j {
            1.0 / norm
        } else if c == j {
            -(j as f64) / norm
        } else {
            0.0
        }
    })
}

/// Covariance of the orthonormal contrasts pooled within groups.
pub fn contrast_covariance(data: &StudyDataset) -> DMatrix<f64> {
    let k = data.levels().len();
    let c = helmert_contrasts(k);
    let p = k - 1;
    let mut s = DMatrix::<f64>::zeros(p, p);
    for g in 0..data.groups().len() {
        let zs: Vec<_> = data
            .subjects()
            .iter()
            .filter(|sub| sub.group == g)
            .map(|sub| &c * nalgebra::DVector::from_column_slice(&sub.values))
            .collect();
        let mean = zs.iter().fold(nalgebra::DVector::zeros(p), |acc, z| acc + z) / zs.len() as f64;
        for z in &zs {
            let d = z - &mean;
            s += &d * d.transpose();
        }
    }
    s / (data.n_subjects() - data.groups().len()) as f64
}

fn is_singular(s: &DMatrix<f64>) -> bool {
    let p = s.nrows() as f64;
    let scale = (s.trace() / p).powf(p);
    scale.is_nan() || scale <= 0.0 || s.determinant() <= 1e-12 * scale
}

/// Mauchly's sphericity test on the pooled contrast covariance.
pub fn mauchly_test(data: &StudyDataset) -> Result<MauchlyTest, StatsError> {
    let k = data.levels().len();
    if k < 3 {
        return Err(StatsError::BadDesign("three time levels for Mauchly's test"));
    }
    let s = contrast_covariance(data);
    if is_singular(&s) {
        return Err(StatsError::SingularContrastCovariance);
    }
    let p = (k - 1) as f64;
    let w = (s.determinant() / (s.trace() / p).powf(p)).clamp(0.0, 1.0);
    let nu = (data.n_subjects() - data.groups().len()) as f64;
    let chi2 = -(nu - (2.0 * p * p + p + 2.0) / (6.0 * p)) * w.ln();
    let df = (k * (k - 1)) as f64 / 2.0 - 1.0;
    Ok(MauchlyTest { w, chi2, df, p: chi2_p_value(chi2.max(0.0), df) })
}

/// Greenhouse-Geisser and Huynh-Feldt epsilons. `None` when the contrast
/// covariance is zero.
pub fn epsilons(data: &StudyDataset) -> Option<(f64, f64)> {
    let k = data.levels().len();
    let p = (k - 1) as f64;
    let s = contrast_covariance(data);
    let tr = s.trace();
    let tr2 = (&s * &s).trace();
    if !(tr > 0.0 && tr2 > 0.0) {
        return None;
    }
    let gg = (tr * tr / (p * tr2)).clamp(1.0 / p, 1.0);
    let nu = (data.n_subjects() - data.groups().len()) as f64;
    let denom = p * (nu - p * gg);
    let hf = if denom > 0.0 { ((nu + 1.0) * p * gg - 2.0) / denom } else { 1.0 };
    Some((gg, hf.min(1.0)))
}

fn ratio(ms_effect: f64, ss_effect: f64, ms_error: f64) -> f64 {
    if ss_effect == 0.0 {
        0.0
    } else {
        ms_effect / ms_error
    }
}

fn eta(ss_effect: f64, ss_error: f64) -> f64 {
    if ss_effect == 0.0 {
        0.0
    } else {
        ss_effect / (ss_effect + ss_error)
    }
}

pub fn mixed_anova(data: &StudyDataset, policy: CorrectionPolicy) -> Result<MixedAnovaTable, StatsError> {
    let k = data.levels().len();
    let g = data.groups().len();
    let n = data.n_subjects();
    let kf = k as f64;
    let nf = n as f64;

    let subjects = data.subjects();
    let gm = subjects.iter().flat_map(|s| s.values.iter()).sum::<f64>() / (nf * kf);
    let subj_mean: Vec<f64> = subjects.iter().map(|s| s.values.iter().sum::<f64>() / kf).collect();
    let sizes: Vec<f64> = (0..g).map(|j| data.group_size(j) as f64).collect();
    let cell: Vec<Vec<f64>> = (0..g)
        .map(|j| (0..k).map(|t| data.cell(j, t).sum::<f64>() / sizes[j]).collect())
        .collect();
    let group_mean: Vec<f64> = cell.iter().map(|row| row.iter().sum::<f64>() / kf).collect();
    let time_mean: Vec<f64> = (0..k).map(|t| subjects.iter().map(|s| s.values[t]).sum::<f64>() / nf).collect();

    let sq = |x: f64| x * x;
    let total: f64 = subjects.iter().flat_map(|s| s.values.iter()).map(|v| sq(v - gm)).sum();
    let ss_group = kf * (0..g).map(|j| sizes[j] * sq(group_mean[j] - gm)).sum::<f64>();
    let ss_subj = kf * subjects.iter().zip(&subj_mean).map(|(s, m)| sq(m - group_mean[s.group])).sum::<f64>();
    let ss_time = nf * time_mean.iter().map(|m| sq(m - gm)).sum::<f64>();
    let ss_cells: f64 = (0..g).map(|j| sizes[j] * cell[j].iter().map(|m| sq(m - gm)).sum::<f64>()).sum();
    let ss_txg = (ss_cells - ss_group - ss_time).max(0.0);
    let ss_error: f64 = subjects
        .iter()
        .zip(&subj_mean)
        .map(|(s, m)| {
            (0..k).map(|t| sq(s.values[t] - m - cell[s.group][t] + group_mean[s.group])).sum::<f64>()
        })
        .sum();

    let df_group = (g - 1) as f64;
    let df_subj = (n - g) as f64;
    let df_time = (k - 1) as f64;
    let df_txg = ((k - 1) * (g - 1)) as f64;
    let df_error = ((k - 1) * (n - g)) as f64;
    let ms_subj = ss_subj / df_subj;
    let ms_error = ss_error / df_error;

    let sphericity = epsilons(data).map(|(gg, hf)| Sphericity {
        epsilon_gg: gg,
        epsilon_hf: hf,
        mauchly: if k >= 3 { mauchly_test(data).ok() } else { None },
    });
    let explicit = |c: Correction| match sphericity {
        Some(_) => Ok(c),
        None => Err(StatsError::SingularContrastCovariance),
    };
    let correction = match policy {
        CorrectionPolicy::None => Correction::None,
        CorrectionPolicy::GreenhouseGeisser => explicit(Correction::GreenhouseGeisser)?,
        CorrectionPolicy::HuynhFeldt => explicit(Correction::HuynhFeldt)?,
        CorrectionPolicy::Auto => match sphericity {
            None => Correction::None,
            Some(_) if k < 3 => Correction::None,
            Some(s) => {
                // A singular covariance is the W = 0 limit: sphericity fails.
                let violated = s.mauchly.is_none_or(|m| m.p < SPHERICITY_ALPHA);
                match (violated, s.epsilon_gg <= GG_THRESHOLD) {
                    (false, _) => Correction::None,
                    (true, true) => Correction::GreenhouseGeisser,
                    (true, false) => Correction::HuynhFeldt,
                }
            }
        },
    };
    let eps = match (correction, sphericity) {
        (Correction::GreenhouseGeisser, Some(s)) => s.epsilon_gg,
        (Correction::HuynhFeldt, Some(s)) => s.epsilon_hf,
        _ => 1.0,
    };

    let row = |effect: Effect, ss: f64, df1: f64, df2: f64, ms_err: f64, ss_err: f64| {
        let ms = ss / df1;
        let f = ratio(ms, ss, ms_err);
        let (df1, df2) = if effect.is_within() { (df1 * eps, df2 * eps) } else { (df1, df2) };
        EffectRow { effect, ss, df1, df2, ms, f, p: f_p_value(f, df1, df2), eta_p2: eta(ss, ss_err) }
    };
    let rows = [
        row(Effect::Time, ss_time, df_time, df_error, ms_error, ss_error),
        row(Effect::Group, ss_group, df_group, df_subj, ms_subj, ss_subj),
        row(Effect::TimeByGroup, ss_txg, df_txg, df_error, ms_error, ss_error),
    ];
    Ok(MixedAnovaTable {
        rows,
        ss: Partition {
            total,
            group: ss_group,
            subjects_within_groups: ss_subj,
            time: ss_time,
            time_by_group: ss_txg,
            within_error: ss_error,
        },
        df_subjects_within_groups: df_subj,
        df_within_error: df_error,
        ms_subjects_within_groups: ms_subj,
        ms_within_error: ms_error,
        sphericity,
        correction,
        n_subjects: n,
        n_groups: g,
        n_levels: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(groups: Vec<Vec<Vec<f64>>>) -> StudyDataset {
        let levels: Vec<&str> = ["pre", "post", "followup", "late"][..groups[0][0].len()].to_vec();
        StudyDataset::from_groups(
            &levels,
            groups.into_iter().enumerate().map(|(i, g)| (format!("g{i}"), g)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn helmert_rows_are_orthonormal_contrasts() {
        for k in 2..6 {
            let c = helmert_contrasts(k);
            let id = &c * c.transpose();
            assert!((id - DMatrix::identity(k - 1, k - 1)).norm() < 1e-14);
            for r in 0..k - 1 {
                assert!(c.row(r).sum().abs() < 1e-14);
            }
        }
    }

    #[test]
    fn flat_subjects_give_zero_time_effect() {
        let d = dataset(vec![
            vec![vec![3.0; 3], vec![5.0; 3], vec![4.0; 3]],
            vec![vec![8.0; 3], vec![9.0; 3], vec![7.0; 3]],
        ]);
        let t = mixed_anova(&d, CorrectionPolicy::Auto).unwrap();
        let time = t.row(Effect::Time);
        assert_eq!((time.ss, time.f, time.p), (0.0, 0.0, 1.0));
        assert!(t.row(Effect::Group).f > 0.0);
        assert_eq!(t.sphericity, None);
        assert_eq!(t.correction, Correction::None);
        assert_eq!(mixed_anova(&d, CorrectionPolicy::GreenhouseGeisser), Err(StatsError::SingularContrastCovariance));
    }

    #[test]
    fn reported_effect_sizes() {
        assert!((partial_eta_sq_from_f(42.92, 1.59, 65.09) - 0.512).abs() < 5e-4);
        assert!((partial_eta_sq_from_f(6.98, 1.0, 41.0) - 0.145).abs() < 5e-4);
        assert_eq!(partial_eta_sq_from_f(0.0, 2.0, 40.0), 0.0);
    }

    #[test]
    fn two_levels_need_no_correction() {
        let d = dataset(vec![
            vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 3.5]],
            vec![vec![2.0, 2.0], vec![1.0, 0.0], vec![4.0, 6.0]],
        ]);
        let t = mixed_anova(&d, CorrectionPolicy::Auto).unwrap();
        let s = t.sphericity.unwrap();
        assert_eq!((s.epsilon_gg, s.mauchly), (1.0, None));
        assert!(mauchly_test(&d).is_err());
    }
}

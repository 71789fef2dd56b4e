//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shadowdrive::stats::StudyDataset;
use shadowdrive::Vec3;
use statrs::function::gamma::ln_gamma;

/// Regularized incomplete beta by its positive-term power series,
///
/// I_x(a, b) = x^a (1-x)^b / (a B(a, b)) * sum_n (a+b)_n / (a+1)_n x^n,
///
/// reflected through I_x(a, b) = 1 - I_{1-x}(b, a) when x > 1/2.
pub fn beta_reg_series(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if x > 0.5 {
        return 1.0 - beta_reg_series(b, a, 1.0 - x);
    }
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let prefix = (a * x.ln() + b * (1.0 - x).ln() - ln_beta).exp() / a;
    let (mut term, mut sum) = (1.0f64, 1.0f64);
    let mut n = 0.0;
    loop {
        term *= (a + b + n) / (a + 1.0 + n) * x;
        sum += term;
        n += 1.0;
        // terms decrease once x (a + b + n) < a + 1 + n
        if term < 1e-18 * sum && x * (a + b + n) < a + 1.0 + n {
            break;
        }
    }
    prefix * sum
}

/// P(F > f) through the series.
pub fn f_upper_series(f: f64, df1: f64, df2: f64) -> f64 {
    beta_reg_series(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))
}

/// Sums of squares of a balanced mixed design from cell means, with the
/// error terms obtained by subtraction.
#[derive(Debug, Clone, Copy)]
pub struct PartitionOracle {
    pub total: f64,
    pub group: f64,
    pub subjects: f64,
    pub time: f64,
    pub txg: f64,
    pub error: f64,
    pub df: [f64; 5],
}

impl PartitionOracle {
    pub fn f_time(&self) -> f64 {
        (self.time / self.df[2]) / (self.error / self.df[4])
    }

    pub fn f_group(&self) -> f64 {
        (self.group / self.df[0]) / (self.subjects / self.df[1])
    }

    pub fn f_txg(&self) -> f64 {
        (self.txg / self.df[3]) / (self.error / self.df[4])
    }
}

/// `groups[g][i][t]`, every group the same size.
pub fn partition_oracle(groups: &[Vec<Vec<f64>>]) -> PartitionOracle {
    let g = groups.len();
    let n = groups[0].len();
    let k = groups[0][0].len();
    let all: Vec<f64> = groups.iter().flatten().flatten().copied().collect();
    let gm = all.iter().sum::<f64>() / all.len() as f64;
    let total: f64 = all.iter().map(|y| (y - gm).powi(2)).sum();

    let mut between_subjects = 0.0;
    let mut cells = 0.0;
    let mut group_ss = 0.0;
    let mut time_means = vec![0.0; k];
    for rows in groups {
        let mut group_sum = 0.0;
        for row in rows {
            let m = row.iter().sum::<f64>() / k as f64;
            between_subjects += k as f64 * (m - gm).powi(2);
            group_sum += row.iter().sum::<f64>();
        }
        group_ss += (n * k) as f64 * (group_sum / (n * k) as f64 - gm).powi(2);
        for t in 0..k {
            let cell = rows.iter().map(|r| r[t]).sum::<f64>() / n as f64;
            cells += n as f64 * (cell - gm).powi(2);
            time_means[t] += rows.iter().map(|r| r[t]).sum::<f64>();
        }
    }
    let time: f64 = time_means.iter().map(|s| (g * n) as f64 * (s / (g * n) as f64 - gm).powi(2)).sum();
    let txg = cells - group_ss - time;
    let subjects = between_subjects - group_ss;
    let error = total - between_subjects - time - txg;
    let (gf, nf, kf) = (g as f64, (g * n) as f64, k as f64);
    PartitionOracle {
        total,
        group: group_ss,
        subjects,
        time,
        txg,
        error,
        df: [gf - 1.0, nf - gf, kf - 1.0, (kf - 1.0) * (gf - 1.0), (kf - 1.0) * (nf - gf)],
    }
}

/// Seeded balanced design with group, time and subject effects plus noise.
pub fn random_groups(seed: u64, groups: usize, per_group: usize, levels: usize) -> Vec<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..groups)
        .map(|g| {
            let shift = g as f64 * rng.random_range(-2.0..2.0);
            (0..per_group)
                .map(|_| {
                    let subject = rng.random_range(-3.0..3.0);
                    (0..levels)
                        .map(|t| 10.0 + shift + subject + t as f64 * (1.0 + g as f64) * 0.7 + rng.random_range(-2.0..2.0))
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn to_dataset(groups: Vec<Vec<Vec<f64>>>) -> StudyDataset {
    let k = groups[0][0].len();
    let levels: Vec<String> = (0..k).map(|t| format!("t{t}")).collect();
    let levels: Vec<&str> = levels.iter().map(String::as_str).collect();
    StudyDataset::from_groups(&levels, groups.into_iter().enumerate().map(|(i, g)| (format!("g{i}"), g)).collect())
        .unwrap()
}

type Column = Box<dyn Fn(&(usize, usize, usize, f64)) -> f64>;

fn rss(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let beta = x.clone().svd(true, true).solve(y, 1e-10).unwrap();
    (y - x * beta).norm_squared()
}

/// Sequential sums of squares by nested least-squares fits on the long
/// data: intercept, group, subjects, time, time x group.
pub fn regression_oracle(groups: &[Vec<Vec<f64>>]) -> [f64; 5] {
    let g = groups.len();
    let k = groups[0][0].len();
    let mut rows = Vec::new(); // (group, subject, time, y)
    let mut subject = 0;
    for (gi, members) in groups.iter().enumerate() {
        for r in members {
            for (t, y) in r.iter().enumerate() {
                rows.push((gi, subject, t, *y));
            }
            subject += 1;
        }
    }
    let n_subj = subject;
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.3));
    let design = |group: bool, subjects: bool, time: bool, inter: bool| {
        let mut cols: Vec<Column> = vec![Box::new(|_| 1.0)];
        if group && !subjects {
            for j in 1..g {
                cols.push(Box::new(move |r| (r.0 == j) as u8 as f64));
            }
        }
        if subjects {
            for s in 1..n_subj {
                cols.push(Box::new(move |r| (r.1 == s) as u8 as f64));
            }
        }
        if time {
            for t in 1..k {
                cols.push(Box::new(move |r| (r.2 == t) as u8 as f64));
            }
        }
        if inter {
            for j in 1..g {
                for t in 1..k {
                    cols.push(Box::new(move |r| (r.0 == j && r.2 == t) as u8 as f64));
                }
            }
        }
        DMatrix::from_fn(rows.len(), cols.len(), |i, c| cols[c](&rows[i]))
    };
    let r0 = rss(&design(false, false, false, false), &y);
    let r_group = rss(&design(true, false, false, false), &y);
    let r_subj = rss(&design(true, true, false, false), &y);
    let r_time = rss(&design(true, true, true, false), &y);
    let r_full = rss(&design(true, true, true, true), &y);
    [r0 - r_group, r_group - r_subj, r_subj - r_time, r_time - r_full, r_full]
}

/// Pooled within-group covariance of orthonormalized polynomial contrasts.
pub fn polynomial_contrast_covariance(groups: &[Vec<Vec<f64>>]) -> DMatrix<f64> {
    let k = groups[0][0].len();
    let p = k - 1;
    // columns: 1, t, t^2, ...; Gram-Schmidt via QR drops the constant
    let basis = DMatrix::from_fn(k, k, |t, d| (t as f64).powi(d as i32));
    let q = basis.qr().q();
    let contrasts = q.columns(1, p).into_owned(); // k x p, orthogonal to 1
    let mut s = DMatrix::<f64>::zeros(p, p);
    let mut dof = 0usize;
    for members in groups {
        let zs: Vec<DVector<f64>> =
            members.iter().map(|r| contrasts.transpose() * DVector::from_column_slice(r)).collect();
        let mut mean = DVector::zeros(p);
        for z in &zs {
            mean += z;
        }
        mean /= zs.len() as f64;
        for z in &zs {
            for a in 0..p {
                for b in 0..p {
                    s[(a, b)] += (z[a] - mean[a]) * (z[b] - mean[b]);
                }
            }
        }
        dof += zs.len() - 1;
    }
    s / dof as f64
}

/// (W, ε_GG) from eigenvalues of the contrast covariance.
pub fn sphericity_oracle(groups: &[Vec<Vec<f64>>]) -> (f64, f64) {
    let s = polynomial_contrast_covariance(groups);
    let p = s.nrows() as f64;
    let eig = s.symmetric_eigen().eigenvalues;
    let sum: f64 = eig.iter().sum();
    let sum_sq: f64 = eig.iter().map(|l| l * l).sum();
    let prod: f64 = eig.iter().product();
    (prod / (sum / p).powf(p), sum * sum / (p * sum_sq))
}

/// Point at arc-length fraction `f` found by walking a densely subdivided
/// copy of the polyline.
pub fn dense_arc_point(points: &[Vec3], f: f64, subdivisions: usize) -> Vec3 {
    let mut dense = vec![points[0]];
    for w in points.windows(2) {
        for s in 1..=subdivisions {
            dense.push(w[0].lerp(w[1], s as f64 / subdivisions as f64));
        }
    }
    let lengths: Vec<f64> = dense.windows(2).map(|w| w[0].distance(w[1])).collect();
    let total: f64 = lengths.iter().sum();
    let target = f * total;
    let mut walked = 0.0;
    for (i, len) in lengths.iter().enumerate() {
        if walked + len >= target && *len > 0.0 {
            return dense[i].lerp(dense[i + 1], (target - walked) / len);
        }
        walked += len;
    }
    *dense.last().unwrap()
}

/// Whether the closed segment comes within `r` of `c`, by clamped
/// projection.
pub fn segment_touches_ball(a: Vec3, b: Vec3, c: Vec3, r: f64) -> bool {
    let d = b - a;
    let t = if d.norm_sq() == 0.0 { 0.0 } else { ((c - a).dot(d) / d.norm_sq()).clamp(0.0, 1.0) };
    (a + d * t).distance(c) <= r
}

/// Per-axis interval test.
pub fn inside_box(p: Vec3, center: Vec3, half: Vec3) -> bool {
    let axis = |p: f64, c: f64, h: f64| c - h <= p && p <= c + h;
    axis(p.x, center.x, half.x) && axis(p.y, center.y, half.y) && axis(p.z, center.z, half.z)
}

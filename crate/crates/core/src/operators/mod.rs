//! Matrix-free measurement operators.
//!
//! Every operator maps a row-major window of `window_side²` pixels to a
//! vector of measurements. Operators can also be applied to a coarser grid
//! through [`MeasurementOperator::on_grid`], where each unknown stands for an
//! `f x f` block of identical pixels; that is how coarse reconstructions are
//! both solved for and re-measured at finer scales.

mod masks;
mod walsh_map;

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use masks::{MaskEnsemble, MaskScheme, MAX_MASK_BYTES};
pub use walsh_map::{design_sampling_map, LevelFractions, WalshSamplingMap};

use crate::error::{Error, Result};
use crate::imaging::{block_sum_into, replicate_into, Image};
use crate::transforms::Walsh2dPlan;
use masks::PackedMasks;

/// A real linear map given only by its action and the action of its adjoint.
pub trait LinearOperator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `y = A x`; `y` has length `rows()`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// `x = A^T y`; `x` has length `cols()`.
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]);
}

/// Serializable description of how an operator was built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    MacroMask(MaskEnsemble),
    WalshSubset {
        map: WalshSamplingMap,
        /// Which of the map's levels (0 low, 1 mid, 2 high) are measured.
        levels: Vec<usize>,
    },
    Stacked {
        window_side: usize,
        parts: Vec<OperatorKind>,
    },
}

#[derive(Clone, Debug)]
enum Imp {
    Mask(Arc<PackedMasks>),
    Walsh {
        plan: Arc<Walsh2dPlan>,
        indices: Vec<usize>,
    },
    Stacked(Vec<MeasurementOperator>),
}

/// Logical measurement count and physical DMD exposures.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleCost {
    pub logical: usize,
    pub physical: usize,
}

impl std::ops::Add for CycleCost {
    type Output = CycleCost;

    fn add(self, o: CycleCost) -> CycleCost {
        CycleCost {
            logical: self.logical + o.logical,
            physical: self.physical + o.physical,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeasurementOperator {
    kind: OperatorKind,
    window_side: usize,
    rows: usize,
    column_scale: f64,
    imp: Imp,
}

pub fn build_macro_mask_operator(
    window_side: usize,
    macro_side: usize,
    scheme: MaskScheme,
    num_masks: usize,
    seed: u64,
) -> Result<MeasurementOperator> {
    MeasurementOperator::from_kind(&OperatorKind::MacroMask(MaskEnsemble {
        window_side,
        macro_side,
        scheme,
        num_masks,
        seed,
    }))
}

/// All coefficients selected by the map.
pub fn build_walsh_operator(map: &WalshSamplingMap) -> Result<MeasurementOperator> {
    build_walsh_level_operator(map, &[0, 1, 2])
}

/// The coefficients of the listed levels only. The column scale is that of
/// the whole map so level operators stack into the full one exactly.
pub fn build_walsh_level_operator(map: &WalshSamplingMap, levels: &[usize]) -> Result<MeasurementOperator> {
    MeasurementOperator::from_kind(&OperatorKind::WalshSubset {
        map: map.clone(),
        levels: levels.to_vec(),
    })
}

/// Vertical concatenation `[a; b]`.
pub fn stack(a: &MeasurementOperator, b: &MeasurementOperator) -> Result<MeasurementOperator> {
    MeasurementOperator::stacked(vec![a.clone(), b.clone()])
}

pub fn cycle_cost(op: &MeasurementOperator) -> CycleCost {
    match &op.imp {
        Imp::Mask(m) => CycleCost {
            logical: op.rows,
            physical: match m.params.scheme {
                MaskScheme::Binary01 => op.rows,
                MaskScheme::Rademacher => 2 * op.rows,
            },
        },
        Imp::Walsh { .. } => CycleCost {
            logical: op.rows,
            physical: 2 * op.rows,
        },
        Imp::Stacked(parts) => parts.iter().map(cycle_cost).fold(CycleCost::default(), |a, c| a + c),
    }
}

impl MeasurementOperator {
    pub fn from_kind(kind: &OperatorKind) -> Result<Self> {
        match kind {
            OperatorKind::MacroMask(ens) => {
                let packed = PackedMasks::generate(*ens)?;
                Ok(MeasurementOperator {
                    kind: kind.clone(),
                    window_side: ens.window_side,
                    rows: ens.num_masks,
                    column_scale: ens.column_scale(),
                    imp: Imp::Mask(Arc::new(packed)),
                })
            }
            OperatorKind::WalshSubset { map, levels } => {
                map.validate()?;
                if levels.iter().any(|&l| l > 2) {
                    return Err(Error::InvalidParameter(format!("unknown Walsh levels {levels:?}")));
                }
                let n = map.window_side;
                let plan = Walsh2dPlan::new(n, n)?;
                let indices: Vec<usize> = map
                    .selected
                    .iter()
                    .copied()
                    .filter(|&i| levels.contains(&map.level_of(i / n, i % n)))
                    .collect();
                Ok(MeasurementOperator {
                    kind: kind.clone(),
                    window_side: n,
                    rows: indices.len(),
                    column_scale: ((n * n) as f64 / map.rows() as f64).sqrt(),
                    imp: Imp::Walsh {
                        plan: Arc::new(plan),
                        indices,
                    },
                })
            }
            OperatorKind::Stacked { window_side, parts } if parts.is_empty() => Ok(Self::empty(*window_side)),
            OperatorKind::Stacked { window_side, parts } => {
                let built = parts.iter().map(Self::from_kind).collect::<Result<Vec<_>>>()?;
                let mut op = Self::stacked(built)?;
                op.window_side = *window_side;
                Ok(op)
            }
        }
    }

    /// An operator with no rows.
    pub fn empty(window_side: usize) -> Self {
        MeasurementOperator {
            kind: OperatorKind::Stacked {
                window_side,
                parts: Vec::new(),
            },
            window_side,
            rows: 0,
            column_scale: 1.0,
            imp: Imp::Stacked(Vec::new()),
        }
    }

    pub fn stacked(parts: Vec<MeasurementOperator>) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::InvalidParameter(
                "cannot stack zero operators; use empty()".into(),
            ));
        };
        let side = first.window_side;
        if let Some(bad) = parts.iter().find(|p| p.window_side != side) {
            return Err(Error::DimensionMismatch(format!(
                "stacking operators on {side}x{side} and {0}x{0} windows",
                bad.window_side
            )));
        }
        Ok(MeasurementOperator {
            kind: OperatorKind::Stacked {
                window_side: side,
                parts: parts.iter().map(|p| p.kind.clone()).collect(),
            },
            window_side: side,
            rows: parts.iter().map(|p| p.rows).sum(),
            column_scale: 1.0,
            imp: Imp::Stacked(parts),
        })
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn window_side(&self) -> usize {
        self.window_side
    }

    pub fn column_scale(&self) -> f64 {
        self.column_scale
    }

    /// Simulated noiseless measurements of a window image.
    pub fn measure(&self, window: &Image) -> Result<Vec<f64>> {
        if window.height() != self.window_side || window.width() != self.window_side {
            return Err(Error::DimensionMismatch(format!(
                "operator expects a {0}x{0} window, got {1}x{2}",
                self.window_side,
                window.height(),
                window.width()
            )));
        }
        let mut y = vec![0.0; self.rows];
        self.apply(window.data(), &mut y);
        Ok(y)
    }

    /// View acting on a grid whose cells are `factor x factor` pixel blocks.
    pub fn on_grid(&self, factor: usize) -> Result<GridView<'_>> {
        if factor == 0 || self.window_side % factor != 0 {
            return Err(Error::DimensionMismatch(format!(
                "grid factor {factor} does not divide window side {}",
                self.window_side
            )));
        }
        Ok(GridView { op: self, factor })
    }

    fn apply_grid(&self, f: usize, u: &[f64], y: &mut [f64]) {
        match &self.imp {
            Imp::Mask(m) if m.params.macro_side % f == 0 => {
                let r = m.params.macro_side / f;
                let grid = self.window_side / f;
                let mut z = vec![0.0; m.params.num_macro_pixels()];
                block_sum_into(u, grid, r, &mut z);
                m.forward(&z, y, self.column_scale * (f * f) as f64);
            }
            Imp::Mask(m) => {
                let x = self.lift(u, f);
                let mut z = vec![0.0; m.params.num_macro_pixels()];
                block_sum_into(&x, self.window_side, m.params.macro_side, &mut z);
                m.forward(&z, y, self.column_scale);
            }
            Imp::Walsh { plan, indices } => {
                let x = self.lift(u, f);
                let mut c = vec![0.0; x.len()];
                plan.forward(&x, &mut c);
                for (o, &i) in y.iter_mut().zip(indices) {
                    *o = self.column_scale * c[i];
                }
            }
            Imp::Stacked(parts) => {
                let mut start = 0;
                for p in parts {
                    p.apply_grid(f, u, &mut y[start..start + p.rows]);
                    start += p.rows;
                }
            }
        }
    }

    fn adjoint_grid(&self, f: usize, y: &[f64], u: &mut [f64]) {
        match &self.imp {
            Imp::Mask(m) if m.params.macro_side % f == 0 => {
                let r = m.params.macro_side / f;
                let mut z = vec![0.0; m.params.num_macro_pixels()];
                m.adjoint(y, &mut z, self.column_scale * (f * f) as f64);
                replicate_into(&z, m.params.grid_side(), r, u);
            }
            Imp::Mask(m) => {
                let mut z = vec![0.0; m.params.num_macro_pixels()];
                m.adjoint(y, &mut z, self.column_scale);
                let mut x = vec![0.0; self.window_side * self.window_side];
                replicate_into(&z, m.params.grid_side(), m.params.macro_side, &mut x);
                block_sum_into(&x, self.window_side, f, u);
            }
            Imp::Walsh { plan, indices } => {
                let n2 = self.window_side * self.window_side;
                let mut c = vec![0.0; n2];
                for (&v, &i) in y.iter().zip(indices) {
                    c[i] = self.column_scale * v;
                }
                let mut x = vec![0.0; n2];
                plan.inverse(&c, &mut x);
                block_sum_into(&x, self.window_side, f, u);
            }
            Imp::Stacked(parts) => {
                u.iter_mut().for_each(|v| *v = 0.0);
                let mut tmp = vec![0.0; u.len()];
                let mut start = 0;
                for p in parts {
                    p.adjoint_grid(f, &y[start..start + p.rows], &mut tmp);
                    u.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
                    start += p.rows;
                }
            }
        }
    }

    fn lift(&self, u: &[f64], f: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.window_side * self.window_side];
        replicate_into(u, self.window_side / f, f, &mut x);
        x
    }
}

impl LinearOperator for MeasurementOperator {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.window_side * self.window_side
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_grid(1, x, y)
    }

    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        self.adjoint_grid(1, y, x)
    }
}

/// A measurement operator composed with pixel replication from a coarser
/// grid: `A_f u = A lift_f(u)`.
#[derive(Clone, Copy, Debug)]
pub struct GridView<'a> {
    op: &'a MeasurementOperator,
    factor: usize,
}

impl GridView<'_> {
    pub fn grid_side(&self) -> usize {
        self.op.window_side / self.factor
    }

    pub fn factor(&self) -> usize {
        self.factor
    }
}

impl LinearOperator for GridView<'_> {
    fn rows(&self) -> usize {
        self.op.rows
    }

    fn cols(&self) -> usize {
        self.grid_side() * self.grid_side()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply_grid(self.factor, x, y)
    }

    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        self.op.adjoint_grid(self.factor, y, x)
    }
}

/// Explicit matrix operator for small problems and cross-checks.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator(pub DMatrix<f64>);

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.0.nrows()
    }

    fn cols(&self) -> usize {
        self.0.ncols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, o) in y.iter_mut().enumerate() {
            *o = self.0.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        for (j, o) in x.iter_mut().enumerate() {
            *o = self.0.column(j).iter().zip(y).map(|(a, b)| a * b).sum();
        }
    }
}

/// The `n x n` identity.
#[derive(Clone, Copy, Debug)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn rows(&self) -> usize {
        self.0
    }

    fn cols(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x)
    }

    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        x.copy_from_slice(y)
    }
}

/// Materializes an operator column by column.
pub fn to_dense(op: &dyn LinearOperator) -> DMatrix<f64> {
    let (m, n) = (op.rows(), op.cols());
    let mut out = DMatrix::zeros(m, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        out.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    out
}

/// Power-method estimate of `||A||₂²`.
pub fn estimate_norm_sq(op: &dyn LinearOperator, iters: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..op.cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut y = vec![0.0; op.rows()];
    let mut lambda = 0.0;
    for _ in 0..iters.max(1) {
        let nx = norm(&x);
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        op.apply(&x, &mut y);
        op.apply_adjoint(&y, &mut x);
        lambda = norm(&x);
    }
    lambda
}

/// Hutchinson estimate of `||A||_F²` from Rademacher probes.
pub fn estimate_frobenius_sq(op: &dyn LinearOperator, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; op.cols()];
    let mut y = vec![0.0; op.rows()];
    let mut total = 0.0;
    for _ in 0..probes.max(1) {
        x.iter_mut()
            .for_each(|v| *v = if rng.random::<bool>() { 1.0 } else { -1.0 });
        op.apply(&x, &mut y);
        total += y.iter().map(|v| v * v).sum::<f64>();
    }
    total / probes.max(1) as f64
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    // `op_norm` bounds ||A||; relative to ||A|| ||x|| ||y|| the check stays
    // meaningful when both sides vanish (a high Walsh level seen through a
    // coarse grid).
    fn adjoint_gap(op: &dyn LinearOperator, op_norm: f64, seed: u64) -> f64 {
        let x = random(op.cols(), seed);
        let y = random(op.rows(), seed + 1);
        let mut ax = vec![0.0; op.rows()];
        let mut aty = vec![0.0; op.cols()];
        op.apply(&x, &mut ax);
        op.apply_adjoint(&y, &mut aty);
        let (l, r) = (dot(&ax, &y), dot(&x, &aty));
        (l - r).abs() / (op_norm * norm(&x) * norm(&y))
    }

    #[test]
    fn binary_ones_measurement_counts_on_pixels() {
        let op = build_macro_mask_operator(8, 8, MaskScheme::Binary01, 1, 17).unwrap();
        let y = op.measure(&Image::filled(8, 8, 1.0)).unwrap();
        let Imp::Mask(m) = &op.imp else { unreachable!() };
        let on = m.entry(0, 0);
        assert_eq!(y[0], on * 64.0 * op.column_scale());
    }

    #[test]
    fn rademacher_zero_image_and_determinism() {
        let op = build_macro_mask_operator(32, 4, MaskScheme::Rademacher, 20, 3).unwrap();
        assert!(op.measure(&Image::zeros(32, 32)).unwrap().iter().all(|&v| v == 0.0));
        let img = Image::from_fn(32, 32, |r, c| ((r * 13 + c * 7) % 11) as f64 / 10.0);
        let again = build_macro_mask_operator(32, 4, MaskScheme::Rademacher, 20, 3).unwrap();
        assert_eq!(op.measure(&img).unwrap(), again.measure(&img).unwrap());
    }

    #[test]
    fn masks_only_see_block_means() {
        let op = build_macro_mask_operator(16, 4, MaskScheme::Binary01, 30, 8).unwrap();
        let img = Image::from_fn(16, 16, |r, c| ((r * 5 + c * 3) % 7) as f64);
        let proj = crate::imaging::macro_upsample(&crate::imaging::macro_downsample(&img, 4).unwrap(), 4);
        let (a, b) = (op.measure(&img).unwrap(), op.measure(&proj).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn walsh_constant_image_hits_dc_only() {
        let map = design_sampling_map(32, 204, LevelFractions::for_side(32), 4).unwrap();
        let op = build_walsh_operator(&map).unwrap();
        assert_eq!(op.rows(), 204);
        let y = op.measure(&Image::filled(32, 32, 0.5)).unwrap();
        assert!((y[0] - 0.5 * 1024.0 / 32.0 * op.column_scale()).abs() < 1e-12);
        assert!(y[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn adjoint_identity_for_all_kinds_and_grids() {
        let map = design_sampling_map(16, 80, LevelFractions::DEFAULT, 2).unwrap();
        let ops = vec![
            build_macro_mask_operator(16, 4, MaskScheme::Binary01, 25, 1).unwrap(),
            build_macro_mask_operator(16, 2, MaskScheme::Rademacher, 40, 2).unwrap(),
            build_macro_mask_operator(16, 1, MaskScheme::Rademacher, 33, 3).unwrap(),
            build_walsh_operator(&map).unwrap(),
            build_walsh_level_operator(&map, &[1]).unwrap(),
        ];
        let deep = stack(&stack(&ops[0], &ops[1]).unwrap(), &stack(&ops[2], &ops[3]).unwrap()).unwrap();
        for (i, op) in ops.iter().chain(std::iter::once(&deep)).enumerate() {
            let n = estimate_norm_sq(op, 50, 0).sqrt();
            assert!(adjoint_gap(op, n, i as u64) <= 1e-10);
            for f in [2, 4, 8] {
                let view = op.on_grid(f).unwrap();
                // lifting multiplies the norm by at most f
                assert!(
                    adjoint_gap(&view, n * f as f64, 10 + i as u64) <= 1e-10,
                    "op {i} grid {f}"
                );
            }
        }
    }

    #[test]
    fn grid_view_equals_lifted_apply() {
        let op = build_macro_mask_operator(16, 4, MaskScheme::Rademacher, 12, 5).unwrap();
        let coarse = Image::from_fn(8, 8, |r, c| (r as f64 - c as f64) * 0.1);
        let view = op.on_grid(2).unwrap();
        let mut y = vec![0.0; 12];
        view.apply(coarse.data(), &mut y);
        let direct = op.measure(&crate::imaging::macro_upsample(&coarse, 2)).unwrap();
        for (a, b) in y.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stacking_adds_normal_operators() {
        let a = build_macro_mask_operator(16, 2, MaskScheme::Binary01, 20, 1).unwrap();
        let b = build_macro_mask_operator(16, 1, MaskScheme::Rademacher, 24, 2).unwrap();
        let s = stack(&a, &b).unwrap();
        let (da, db, ds) = (to_dense(&a), to_dense(&b), to_dense(&s));
        let lhs = ds.transpose() * &ds;
        let rhs = da.transpose() * &da + db.transpose() * &db;
        let scale = lhs.norm();
        assert!((lhs - rhs).norm() <= 1e-10 * scale);
        let empty = MeasurementOperator::empty(16);
        let with_empty = stack(&a, &empty).unwrap();
        let img = Image::from_fn(16, 16, |r, c| (r + c) as f64);
        assert_eq!(with_empty.measure(&img).unwrap(), a.measure(&img).unwrap());
        assert!(stack(&a, &MeasurementOperator::empty(8)).is_err());
    }

    #[test]
    fn cycle_costs() {
        let bin = build_macro_mask_operator(32, 8, MaskScheme::Binary01, 1000, 0).unwrap();
        assert_eq!(
            cycle_cost(&bin),
            CycleCost {
                logical: 1000,
                physical: 1000
            }
        );
        let rad = build_macro_mask_operator(64, 1, MaskScheme::Rademacher, 4594, 0).unwrap();
        assert_eq!(
            cycle_cost(&rad),
            CycleCost {
                logical: 4594,
                physical: 9188
            }
        );
        let map = design_sampling_map(32, 204, LevelFractions::for_side(32), 0).unwrap();
        let w = build_walsh_operator(&map).unwrap();
        assert_eq!(
            cycle_cost(&w),
            CycleCost {
                logical: 204,
                physical: 408
            }
        );
        let st = stack(&bin, &MeasurementOperator::empty(32)).unwrap();
        assert_eq!(
            cycle_cost(&st),
            CycleCost {
                logical: 1000,
                physical: 1000
            }
        );
    }

    #[test]
    fn levels_stack_into_full_map() {
        let map = design_sampling_map(32, 204, LevelFractions::for_side(32), 6).unwrap();
        let full = build_walsh_operator(&map).unwrap();
        let parts = MeasurementOperator::stacked(
            (0..3)
                .map(|l| build_walsh_level_operator(&map, &[l]).unwrap())
                .collect(),
        )
        .unwrap();
        let img = Image::from_fn(32, 32, |r, c| ((r * c) % 9) as f64);
        let mut a = full.measure(&img).unwrap();
        let mut b = parts.measure(&img).unwrap();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }

    #[test]
    fn kind_round_trips_through_json() {
        let a = build_macro_mask_operator(16, 2, MaskScheme::Rademacher, 9, 4).unwrap();
        let map = design_sampling_map(16, 50, LevelFractions::DEFAULT, 2).unwrap();
        let s = stack(&a, &build_walsh_level_operator(&map, &[0, 2]).unwrap()).unwrap();
        let json = serde_json::to_string(s.kind()).unwrap();
        let back = MeasurementOperator::from_kind(&serde_json::from_str(&json).unwrap()).unwrap();
        let img = Image::from_fn(16, 16, |r, c| (r * 3 + c) as f64 * 0.01);
        assert_eq!(back.measure(&img).unwrap(), s.measure(&img).unwrap());
    }

    #[test]
    fn norm_estimates() {
        let op = build_macro_mask_operator(16, 2, MaskScheme::Rademacher, 30, 9).unwrap();
        let d = to_dense(&op);
        let fro = d.norm_squared();
        let spec = d.singular_values().max().powi(2);
        assert!((estimate_norm_sq(&op, 200, 1) - spec).abs() < 1e-6 * spec);
        let h = estimate_frobenius_sq(&op, 64, 1);
        assert!((h - fro).abs() < 0.2 * fro);
    }
}

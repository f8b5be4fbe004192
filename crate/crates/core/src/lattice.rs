//! Single-layer lattice geometry, diffraction orders and their couplings.
//!
//! Lengths are in units of the wavelength λ, so `k = 2π`; rates are in units of
//! the single-atom decay rate γ. The dipoles are circularly polarized,
//! `e = (x̂ + iŷ)/√2`, which gives `|Q·e|² = |Q|²/2` for in-plane `Q`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Lattice family, used for design formulas and CLI selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Square,
    Triangular,
}

impl LatticeKind {
    pub fn angle<T: Real>(self) -> T {
        match self {
            LatticeKind::Square => T::FRAC_PI_2(),
            LatticeKind::Triangular => T::FRAC_PI_3(),
        }
    }

    /// `a/λ` at which the first non-zero shell becomes radiative.
    pub fn first_shell_edge<T: Real>(self) -> T {
        match self {
            LatticeKind::Square => T::one(),
            LatticeKind::Triangular => T::lit(2.0) / T::lit(3.0).sqrt(),
        }
    }

    /// `a/λ` at which the second shell becomes radiative.
    pub fn second_shell_edge<T: Real>(self) -> T {
        match self {
            LatticeKind::Square => T::SQRT_2(),
            LatticeKind::Triangular => T::lit(2.0),
        }
    }

    /// `a/λ` at which the third shell becomes radiative.
    pub fn third_shell_edge<T: Real>(self) -> T {
        match self {
            LatticeKind::Square => T::lit(2.0),
            LatticeKind::Triangular => T::lit(4.0) / T::lit(3.0).sqrt(),
        }
    }
}

impl std::str::FromStr for LatticeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "square" | "sq" => Ok(LatticeKind::Square),
            "triangular" | "tri" | "hex" => Ok(LatticeKind::Triangular),
            other => Err(Error::invalid("kind", format!("unknown lattice kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LatticeKind::Square => "square",
            LatticeKind::Triangular => "triangular",
        })
    }
}

/// One 2D Bravais layer with primitive vectors `a₁ = a(1, 0)` and
/// `a₂ = a(cos ψ, sin ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerGeometry<T> {
    pub spacing: T,
    pub lattice_angle: T,
}

/// Integer reciprocal-lattice index `(m₁, m₂)`.
pub type OrderIndex = (i32, i32);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffractionOrder<T> {
    pub index: OrderIndex,
    /// In-plane wavevector in units of k.
    pub q: [T; 2],
    /// Normal wavevector in units of k: real for radiative orders,
    /// `+i|k_z|` for evanescent ones.
    pub kz: Complex<T>,
    /// Coupling rate `Γ_m`, units of γ. Real for radiative orders, purely
    /// imaginary for evanescent ones.
    pub coupling: Complex<T>,
    pub radiative: bool,
}

impl<T: Real> DiffractionOrder<T> {
    pub fn q_norm(&self) -> T {
        (self.q[0] * self.q[0] + self.q[1] * self.q[1]).sqrt()
    }

    pub fn is_zeroth(&self) -> bool {
        self.index == (0, 0)
    }
}

pub(crate) fn grazing_tolerance<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(16.0))
}

impl<T: Real> LayerGeometry<T> {
    pub fn new(spacing: T, lattice_angle: T) -> Result<Self> {
        let g = LayerGeometry {
            spacing,
            lattice_angle,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn square(spacing: T) -> Result<Self> {
        Self::new(spacing, T::FRAC_PI_2())
    }

    pub fn triangular(spacing: T) -> Result<Self> {
        Self::new(spacing, T::FRAC_PI_3())
    }

    pub fn of_kind(kind: LatticeKind, spacing: T) -> Result<Self> {
        Self::new(spacing, kind.angle())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > T::zero()) || !self.spacing.is_finite() {
            return Err(Error::invalid(
                "spacing",
                format!("lattice spacing must be > 0, got {}", self.spacing),
            ));
        }
        if !(self.lattice_angle > T::zero() && self.lattice_angle < T::PI()) {
            return Err(Error::invalid(
                "lattice_angle",
                format!("must lie in (0, π), got {}", self.lattice_angle),
            ));
        }
        Ok(())
    }

    /// Area of the unit cell, `a² sin ψ`.
    pub fn cell_area(&self) -> T {
        self.spacing * self.spacing * self.lattice_angle.sin()
    }

    /// Collective emission rate of one layer into the normal-incidence mode,
    /// `Γ₁D = 3γ/(4π sin ψ) (λ/a)²`.
    pub fn gamma_1d(&self) -> T {
        T::lit(3.0) / (T::lit(4.0) * T::PI() * self.cell_area())
    }

    /// Primitive vectors `a₁`, `a₂` (units of λ).
    pub fn primitive_vectors(&self) -> [[T; 2]; 2] {
        let a = self.spacing;
        [
            [a, T::zero()],
            [a * self.lattice_angle.cos(), a * self.lattice_angle.sin()],
        ]
    }

    /// Reciprocal vector `Q_m = (2π/a)(m₁, −m₁ cot ψ + m₂/sin ψ)` in units of 1/λ.
    pub fn reciprocal_vector(&self, m: OrderIndex) -> [T; 2] {
        let [x, y] = self.reduced_reciprocal(m);
        let s = T::wavenumber() / self.spacing;
        [s * x, s * y]
    }

    fn reduced_reciprocal(&self, (m1, m2): OrderIndex) -> [T; 2] {
        let m1 = T::lit(m1 as f64);
        let m2 = T::lit(m2 as f64);
        let (s, c) = self.lattice_angle.sin_cos();
        [m1, (-m1 * c + m2) / s]
    }

    /// `Q_m / k`.
    pub fn q_over_k(&self, m: OrderIndex) -> [T; 2] {
        let [x, y] = self.reduced_reciprocal(m);
        [x / self.spacing, y / self.spacing]
    }

    pub fn q_norm_over_k(&self, m: OrderIndex) -> T {
        let [x, y] = self.q_over_k(m);
        (x * x + y * y).sqrt()
    }

    /// Normal wavevector, coupling and radiative flag for one order.
    pub fn order_coupling(&self, m: OrderIndex) -> Result<DiffractionOrder<T>> {
        let q = self.q_over_k(m);
        let q2 = q[0] * q[0] + q[1] * q[1];
        if (q2.sqrt() - T::one()).abs() < grazing_tolerance::<T>() {
            return Err(Error::GrazingOrder { m1: m.0, m2: m.1 });
        }
        Ok(self.order_unchecked(m, q, q2))
    }

    fn order_unchecked(&self, m: OrderIndex, q: [T; 2], q2: T) -> DiffractionOrder<T> {
        let radiative = q2 < T::one();
        let kz = if radiative {
            Complex::new((T::one() - q2).sqrt(), T::zero())
        } else {
            Complex::new(T::zero(), (q2 - T::one()).sqrt())
        };
        let numerator = self.gamma_1d() * (T::one() - q2 / T::lit(2.0));
        let coupling = Complex::new(numerator, T::zero()) / kz;
        DiffractionOrder {
            index: m,
            q,
            kz,
            coupling,
            radiative,
        }
    }

    /// Half-width of the index box that contains every radiative order.
    pub fn radiative_search_bound(&self) -> i32 {
        let bound = self.spacing * (T::one() + T::one() / self.lattice_angle.sin());
        bound.ceil().to_f64_lossy() as i32 + 1
    }

    /// All orders with `|Q_m| < k`, sorted by `|Q_m|` and then by index.
    ///
    /// Fails when an order sits on the light cone, where its coupling diverges.
    pub fn radiative_orders(&self, exclude_zero: bool) -> Result<Vec<DiffractionOrder<T>>> {
        let bound = self.radiative_search_bound();
        let mut out = Vec::new();
        for m1 in -bound..=bound {
            for m2 in -bound..=bound {
                if exclude_zero && (m1, m2) == (0, 0) {
                    continue;
                }
                let q = self.q_over_k((m1, m2));
                let q2 = q[0] * q[0] + q[1] * q[1];
                if q2 >= T::lit(1.5) {
                    continue;
                }
                let order = self.order_coupling((m1, m2))?;
                if order.radiative {
                    out.push(order);
                }
            }
        }
        sort_orders(&mut out);
        Ok(out)
    }

    /// True when some order lies within the grazing tolerance of `|Q| = k`.
    pub fn has_grazing_order(&self) -> bool {
        let bound = self.radiative_search_bound();
        (-bound..=bound).any(|m1| {
            (-bound..=bound).any(|m2| {
                (self.q_norm_over_k((m1, m2)) - T::one()).abs() < grazing_tolerance::<T>()
            })
        })
    }

    /// Every order on the boundary ring `max(|m₁|,|m₂|) = ring` of the index box.
    pub(crate) fn ring_orders(&self, ring: i32) -> impl Iterator<Item = DiffractionOrder<T>> + '_ {
        ring_indices(ring).map(move |m| {
            let q = self.q_over_k(m);
            let q2 = q[0] * q[0] + q[1] * q[1];
            self.order_unchecked(m, q, q2)
        })
    }
}

pub(crate) fn ring_indices(ring: i32) -> Box<dyn Iterator<Item = OrderIndex>> {
    if ring == 0 {
        return Box::new(std::iter::once((0, 0)));
    }
    Box::new((-ring..=ring).flat_map(move |m1| {
        (-ring..=ring)
            .filter(move |&m2| m1.abs() == ring || m2.abs() == ring)
            .map(move |m2| (m1, m2))
    }))
}

/// Sort by `|Q|` (quantized so that orders of one shell tie exactly), then by index.
pub(crate) fn sort_orders<T: Real>(orders: &mut [DiffractionOrder<T>]) {
    orders.sort_by(|a, b| {
        let ka = shell_key(a.q_norm());
        let kb = shell_key(b.q_norm());
        ka.cmp(&kb).then(a.index.cmp(&b.index))
    });
}

pub(crate) fn shell_key<T: Real>(q_norm: T) -> i64 {
    (q_norm.to_f64_lossy() * 1.0e9).round() as i64
}

/// Radiative non-zero orders grouped into shells of equal `|Q|`.
pub fn radiative_shells<T: Real>(layer: &LayerGeometry<T>) -> Result<Vec<Vec<DiffractionOrder<T>>>> {
    let orders = layer.radiative_orders(true)?;
    let mut shells: Vec<Vec<DiffractionOrder<T>>> = Vec::new();
    for o in orders {
        match shells.last_mut() {
            Some(shell) if shell_key(shell[0].q_norm()) == shell_key(o.q_norm()) => shell.push(o),
            _ => shells.push(vec![o]),
        }
    }
    Ok(shells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_3, PI};

    #[test]
    fn gamma_1d_examples() {
        let sq = LayerGeometry::square(1.0).unwrap();
        assert_relative_eq!(sq.gamma_1d(), 3.0 / (4.0 * PI), max_relative = 1e-14);
        assert_relative_eq!(sq.gamma_1d(), 0.238_732_414_637_843, max_relative = 1e-12);
        let sq = LayerGeometry::square(1.28).unwrap();
        assert_relative_eq!(sq.gamma_1d(), 0.145_710_702_293_605, max_relative = 1e-12);
        let tri = LayerGeometry::triangular(2.0 / 3f64.sqrt()).unwrap();
        assert_relative_eq!(tri.gamma_1d(), 0.206_748_335_783_172, max_relative = 1e-12);
    }

    #[test]
    fn reciprocal_vector_examples() {
        let a = 1.3;
        let s = 2.0 * PI / a;
        let sq = LayerGeometry::square(a).unwrap();
        let q = sq.reciprocal_vector((1, 0));
        assert_relative_eq!(q[0], s, max_relative = 1e-14);
        assert!(q[1].abs() < 1e-14);
        assert_eq!(sq.reciprocal_vector((0, 0)), [0.0, 0.0]);

        let tri = LayerGeometry::triangular(a).unwrap();
        let q = tri.reciprocal_vector((1, 1));
        assert_relative_eq!(q[0], s, max_relative = 1e-14);
        assert_relative_eq!(q[1], s / 3f64.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(q[0].hypot(q[1]), s * 2.0 / 3f64.sqrt(), max_relative = 1e-13);
        let q = tri.reciprocal_vector((1, -1));
        assert_relative_eq!(q[1], -s * 3f64.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(q[0].hypot(q[1]), 2.0 * s, max_relative = 1e-13);
    }

    #[test]
    fn reciprocal_vectors_are_dual_to_primitive_vectors() {
        let g = LayerGeometry::new(1.7, 1.1).unwrap();
        let [a1, a2] = g.primitive_vectors();
        for (m, n1, n2) in [((1, 0), 1.0, 0.0), ((0, 1), 0.0, 1.0)] {
            let q = g.reciprocal_vector(m);
            let d1 = q[0] * a1[0] + q[1] * a1[1];
            let d2 = q[0] * a2[0] + q[1] * a2[1];
            assert_relative_eq!(d1, 2.0 * PI * n1, epsilon = 1e-12);
            assert_relative_eq!(d2, 2.0 * PI * n2, epsilon = 1e-12);
        }
    }

    #[test]
    fn order_coupling_examples() {
        let sq = LayerGeometry::square(1.28).unwrap();
        let zeroth = sq.order_coupling((0, 0)).unwrap();
        assert_eq!(zeroth.kz, Complex::new(1.0, 0.0));
        assert_relative_eq!(zeroth.coupling.re, sq.gamma_1d(), max_relative = 1e-15);

        let o = sq.order_coupling((1, 0)).unwrap();
        assert!(o.radiative);
        assert_relative_eq!(o.q_norm(), 0.781_25, max_relative = 1e-14);
        assert_relative_eq!(o.kz.re, 0.624_218_261_107_443, max_relative = 1e-12);
        assert_relative_eq!(o.coupling.re / sq.gamma_1d(), 1.113_111_009_468_536, max_relative = 1e-12);

        let tri = LayerGeometry::triangular(1.70).unwrap();
        let o = tri.order_coupling((1, 0)).unwrap();
        assert_relative_eq!(o.q_norm(), 0.679_235_610_811_324, max_relative = 1e-12);
        assert_relative_eq!(o.kz.re, 0.733_920_285_184_820, max_relative = 1e-12);
        assert_relative_eq!(o.coupling.re / tri.gamma_1d(), 1.048_233_041_152_622, max_relative = 1e-12);
    }

    #[test]
    fn evanescent_orders_decay_and_couple_imaginarily() {
        let sq = LayerGeometry::square(0.8).unwrap();
        let o = sq.order_coupling((1, 1)).unwrap();
        assert!(!o.radiative);
        assert_eq!(o.kz.re, 0.0);
        assert!(o.kz.im > 0.0);
        assert_eq!(o.coupling.re, 0.0);
    }

    #[test]
    fn grazing_order_is_an_error() {
        let sq = LayerGeometry::square(1.0).unwrap();
        assert_eq!(
            sq.order_coupling((1, 0)).unwrap_err(),
            Error::GrazingOrder { m1: 1, m2: 0 }
        );
        assert!(sq.radiative_orders(false).is_err());
        assert!(sq.has_grazing_order());
        assert!(!LayerGeometry::square(1.01).unwrap().has_grazing_order());
    }

    #[test]
    fn radiative_sets_of_reference_geometries() {
        let idx = |g: LayerGeometry<f64>| {
            g.radiative_orders(false)
                .unwrap()
                .into_iter()
                .map(|o| o.index)
                .collect::<Vec<_>>()
        };
        assert_eq!(idx(LayerGeometry::square(0.8).unwrap()), vec![(0, 0)]);
        assert_eq!(
            idx(LayerGeometry::square(1.28).unwrap()),
            vec![(0, 0), (-1, 0), (0, -1), (0, 1), (1, 0)]
        );
        assert_eq!(
            idx(LayerGeometry::triangular(1.70).unwrap()),
            vec![(0, 0), (-1, -1), (-1, 0), (0, -1), (0, 1), (1, 0), (1, 1)]
        );
        let without_zero = LayerGeometry::square(1.28).unwrap().radiative_orders(true).unwrap();
        assert_eq!(without_zero.len(), 4);
    }

    #[test]
    fn shell_thresholds_are_exact() {
        let count = |g: LayerGeometry<f64>| g.radiative_orders(false).unwrap().len();
        let eps = 1e-9;
        for (kind, edges, sizes) in [
            (LatticeKind::Square, [1.0, 2f64.sqrt(), 2.0], [1usize, 5, 9, 13]),
            (
                LatticeKind::Triangular,
                [2.0 / 3f64.sqrt(), 2.0, 4.0 / 3f64.sqrt()],
                [1, 7, 13, 19],
            ),
        ] {
            for (i, edge) in edges.iter().enumerate() {
                let below = LayerGeometry::of_kind(kind, edge - eps).unwrap();
                let above = LayerGeometry::of_kind(kind, edge + eps).unwrap();
                assert_eq!(count(below), sizes[i], "{kind} below {edge}");
                assert_eq!(count(above), sizes[i + 1], "{kind} above {edge}");
            }
        }
    }

    #[test]
    fn shells_group_equal_momenta() {
        let tri = LayerGeometry::triangular(2.2).unwrap();
        let shells = radiative_shells(&tri).unwrap();
        assert_eq!(shells.len(), 2);
        assert_eq!(shells[0].len(), 6);
        assert_eq!(shells[1].len(), 6);
        assert_relative_eq!(shells[1][0].q_norm() / shells[0][0].q_norm(), 3f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn couplings_are_inversion_symmetric() {
        for g in [
            LayerGeometry::square(1.53).unwrap(),
            LayerGeometry::triangular(2.21).unwrap(),
            LayerGeometry::new(1.9, 1.2).unwrap(),
        ] {
            for m1 in -4..=4 {
                for m2 in -4..=4 {
                    let Ok(p) = g.order_coupling((m1, m2)) else { continue };
                    let n = g.order_coupling((-m1, -m2)).unwrap();
                    assert_eq!(p.coupling, n.coupling);
                    if p.radiative {
                        assert!(p.coupling.re > 0.0 && p.coupling.im == 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(LayerGeometry::square(0.0).is_err());
        assert!(LayerGeometry::new(1.0, 0.0).is_err());
        assert!(LayerGeometry::new(1.0, PI).is_err());
        assert!(LayerGeometry::new(1.0, FRAC_PI_3).is_ok());
    }

    #[test]
    fn search_bound_covers_large_spacings() {
        // Brute force with a much larger box must find nothing new.
        for a in [1.5, 2.7, 3.9] {
            for psi in [std::f64::consts::FRAC_PI_2, FRAC_PI_3, 0.7] {
                let g = LayerGeometry::new(a, psi).unwrap();
                if g.has_grazing_order() {
                    continue;
                }
                let found = g.radiative_orders(false).unwrap().len();
                let mut brute = 0;
                for m1 in -40..=40 {
                    for m2 in -40..=40 {
                        if g.q_norm_over_k((m1, m2)) < 1.0 {
                            brute += 1;
                        }
                    }
                }
                assert_eq!(found, brute, "a={a} psi={psi}");
            }
        }
    }
}

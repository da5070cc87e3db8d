//! Characteristic pool sizes and closed-form loss bounds.
//!
//! The characteristic equation `x + r (1 - (1-p)^x) = s` balances arrivals
//! against departures-plus-matches for one side of the market; its roots
//! (`k2`, `l2`, `k1` and their shifted variants) are the concentration
//! centers of the stationary pool sizes and the raw material of every bound
//! here. All bounds are asymptotic in the arrival rates and the horizon;
//! evaluated at desk scale they are sanity rails, not sharp predictions.

use serde::Serialize;

use crate::market::{MarketParams, Policy};

/// Unique root of `f(x) = x + other_rate * (1 - (1-p)^x) - lhs_rate` on
/// `[0, lhs_rate]`, by bisection to 1e-12 relative width.
///
/// `f` is strictly increasing with `f(0) < 0 <= f(lhs_rate)`, so the root
/// exists and bisection cannot fail. With `other_rate = 0` the equation
/// degenerates to `x = lhs_rate`.
pub fn solve_characteristic_root(lhs_rate: f64, other_rate: f64, p: f64) -> f64 {
    assert!(lhs_rate > 0.0 && other_rate >= 0.0 && p > 0.0 && p < 1.0);
    if other_rate == 0.0 {
        return lhs_rate;
    }
    let log_survive = (-p).ln_1p();
    let f = |x: f64| x + other_rate * (1.0 - (x * log_survive).exp()) - lhs_rate;
    let (mut lo, mut hi) = (0.0f64, lhs_rate);
    while hi - lo > 1e-12 * lhs_rate {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `sqrt(lambda * ln lambda)`, floored at one: the deviation scale at which
/// the concentration statements keep their tails small.
pub fn default_sigma(lambda: f64) -> f64 {
    if lambda <= 1.0 {
        1.0
    } else {
        (lambda * lambda.ln()).sqrt().max(1.0)
    }
}

/// Characteristic roots of a market, together with the shifted variants
/// used by the concentration regions.
///
/// `k2` solves `lambda_a = x + lambda_b (1-(1-p)^x)`, `l2` the side-swapped
/// equation, and `k1` coincides with `k2` (side U is the inactive side in
/// the 1-sided policies, so its balance equation is the same). The shifted
/// variants perturb the opposing rate by `sigma`:
/// `k2_lower`/`k1_lower` solve against `lambda_b + sigma_b`, `l2_lower`
/// against `lambda_a + sigma_a`, and `k1_upper` against `lambda_b - sigma_b`
/// (only defined while `sigma_b < lambda_b`).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RootSet {
    pub k2: f64,
    pub l2: f64,
    pub k1: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub k2_lower: f64,
    pub l2_lower: f64,
    pub k1_lower: f64,
    pub k1_upper: Option<f64>,
    /// `lambda_b (1-p)^(k1 - sigma_a)`: the ceiling that the active pool of
    /// the 1-sided greedy policy concentrates under.
    pub l1: f64,
}

/// Solves every root with the given deviation scales.
pub fn solve_rootset_with(params: MarketParams, sigma_a: f64, sigma_b: f64) -> RootSet {
    let (la, lb, p) = (params.lambda_a(), params.lambda_b(), params.p());
    let k2 = solve_characteristic_root(la, lb, p);
    let l2 = solve_characteristic_root(lb, la, p);
    let k1 = k2;
    let k2_lower = solve_characteristic_root(la, lb + sigma_b, p);
    let l2_lower = solve_characteristic_root(lb, la + sigma_a, p);
    let k1_upper = (sigma_b < lb).then(|| solve_characteristic_root(la, lb - sigma_b, p));
    RootSet {
        k2,
        l2,
        k1,
        sigma_a,
        sigma_b,
        k2_lower,
        l2_lower,
        k1_lower: k2_lower,
        k1_upper,
        l1: solve_l1(params, k1, sigma_a),
    }
}

/// [`solve_rootset_with`] at the default `sqrt(lambda ln lambda)` scales.
pub fn solve_rootset(params: MarketParams) -> RootSet {
    solve_rootset_with(
        params,
        default_sigma(params.lambda_a()),
        default_sigma(params.lambda_b()),
    )
}

/// `l1 = lambda_b (1-p)^(k1 - sigma_a)`.
///
/// By the defining equation of `k1` this equals
/// `(1-p)^(-sigma_a) (lambda_b - lambda_a + k1)`; the two forms are checked
/// against each other at the root-residual scale.
pub fn solve_l1(params: MarketParams, k1: f64, sigma_a: f64) -> f64 {
    let lb = params.lambda_b();
    let direct = lb * params.survival(k1 - sigma_a);
    let via_identity = params.survival(-sigma_a) * (lb - params.lambda_a() + k1);
    debug_assert!(
        (lb * params.survival(k1) - (lb - params.lambda_a() + k1)).abs() <= 1e-9 * lb,
        "characteristic-root identity violated: {direct} vs {via_identity}"
    );
    direct
}

/// Closed-form upper bounds of one policy.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PolicyUpperBound {
    pub loss_a: f64,
    pub loss_b: f64,
    pub total: f64,
    /// Upper bounds above one say nothing; they are reported verbatim and
    /// flagged rather than clamped.
    pub vacuous: bool,
}

/// Upper bounds for the 2-sided policies and the shared 1-sided bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct UpperBounds {
    pub greedy2: PolicyUpperBound,
    pub patient2: PolicyUpperBound,
    /// Applies to both 1-sided policies.
    pub alg1: PolicyUpperBound,
    /// In the balanced case the patient 2-sided loss decays like
    /// `exp(-C d_a)` for an unspecified constant; only the exponent
    /// `max(d_a - d_b, d_a / (1 + d_b))` is exposed.
    pub patient2_balanced_exponent: f64,
    /// The 2-sided formulas are written for `d_a >= d_b`; when the input is
    /// oriented the other way the sides are swapped internally and swapped
    /// back in the per-side fields.
    pub swapped_sides: bool,
}

pub fn upper_bounds(params: MarketParams) -> UpperBounds {
    let dens = params.densities();
    let swapped = dens.d_a < dens.d_b;
    let oriented = if swapped { params.swapped() } else { params };
    let od = oriented.densities();
    let (da, db) = (od.d_a, od.d_b);
    let log_term = (db + 3.0).ln();
    let exponent = (da - db).max(da / (1.0 + db));

    let g2_a = (da - db) / da + log_term / da;
    let g2_b = log_term / db;
    let g2_total = (da - db) / (da + db) + 2.0 * log_term / (da + db);
    let p2_a = (da - db) / da + log_term / da;
    let p2_b = (-exponent).exp();
    let p2_total = (da - db) / (da + db) + log_term / (da + db) + (-exponent).exp();

    let orient = |a: f64, b: f64| if swapped { (b, a) } else { (a, b) };
    let (g2_a, g2_b) = orient(g2_a, g2_b);
    let (p2_a, p2_b) = orient(p2_a, p2_b);

    // 1-sided: side U is inactive regardless of orientation, and the log
    // term always uses the active side's density d_b.
    let d = params.densities();
    let log1 = (d.d_b + 3.0).ln();
    let (a1_a, a1_b) = if d.d_a >= d.d_b {
        ((d.d_a - d.d_b) / d.d_a + log1 / d.d_a, log1 / d.d_b)
    } else {
        (log1 / d.d_a, (d.d_b - d.d_a) / d.d_b + log1 / d.d_b)
    };
    let a1_total = (d.d_b - d.d_a).abs() / (d.d_a + d.d_b) + 2.0 * log1 / (d.d_a + d.d_b);

    let pack = |loss_a: f64, loss_b: f64, total: f64| PolicyUpperBound {
        loss_a,
        loss_b,
        total,
        vacuous: total > 1.0,
    };
    UpperBounds {
        greedy2: pack(g2_a, g2_b, g2_total),
        patient2: pack(p2_a, p2_b, p2_total),
        alg1: pack(a1_a, a1_b, a1_total),
        patient2_balanced_exponent: exponent,
        swapped_sides: swapped,
    }
}

/// Lower bounds on the loss of the optimal and omniscient benchmarks and of
/// the 1-sided policies.
///
/// Each `*_formula` field is the displayed expression evaluated verbatim;
/// the unsuffixed field is the effective bound: the maximum of the formula
/// and the imbalance floor inside the formula's validity regime, and the
/// imbalance floor alone outside it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LowerBounds {
    /// `|d_a - d_b| / (d_a + d_b)`: unavoidable in every market.
    pub delta_lower: f64,
    pub opt_lower: f64,
    pub omn_lower: f64,
    pub greedy1_lower: f64,
    pub patient1_lower: f64,
    pub opt_lower_formula: f64,
    pub omn_lower_formula: f64,
    pub greedy1_lower_formula: f64,
    pub patient1_lower_formula: f64,
    /// `min(d_a, d_b) >= 1` and `p < 1/10`: validity regime of the
    /// optimal/omniscient formulas.
    pub two_sided_in_regime: bool,
    /// `d_a, d_b >= 1` and `p < 1/10`: validity regime of the 1-sided
    /// formulas.
    pub one_sided_in_regime: bool,
    pub swapped_sides: bool,
}

pub fn lower_bounds(params: MarketParams) -> LowerBounds {
    let dens = params.densities();
    let delta = dens.delta;
    let swapped = dens.d_a < dens.d_b;
    let oriented = if swapped { params.swapped() } else { params };
    let od = oriented.densities();
    let (da, db) = (od.d_a, od.d_b);
    let (la, lb) = (oriented.lambda_a(), oriented.lambda_b());
    let p = params.p();

    let opt_formula = 1.0 / (1.0 + 2.0 * da + db + 2.0 * da * da / la + db * db / lb);
    let omn_formula = 0.5
        * ((-(da + da * p)).exp() / (1.0 + da + da * da / la)
            + (-(db + db * p)).exp() / (1.0 + db + db * db / lb));

    // 1-sided formulas keep the true orientation: side U (density d_a) is
    // the inactive side, side V (density d_b) the active one.
    let d = params.densities();
    let (ra, rb) = (params.lambda_a(), params.lambda_b());
    let greedy1_formula = 1.0 / (2.0 * (1.0 + d.d_b + d.d_b * d.d_b / rb));
    let patient1_formula = (d.d_b + d.d_b * d.d_b / rb).ln()
        / (d.d_a + d.d_b + d.d_a * d.d_a / ra + d.d_b * d.d_b / rb);

    let two_sided_in_regime = db >= 1.0 && p < 0.1;
    let one_sided_in_regime = d.d_a >= 1.0 && d.d_b >= 1.0 && p < 0.1;
    let effective = |formula: f64, in_regime: bool| {
        if in_regime {
            formula.max(delta)
        } else {
            delta
        }
    };
    LowerBounds {
        delta_lower: delta,
        opt_lower: effective(opt_formula, two_sided_in_regime),
        omn_lower: effective(omn_formula, two_sided_in_regime),
        greedy1_lower: effective(greedy1_formula, one_sided_in_regime),
        patient1_lower: effective(patient1_formula, one_sided_in_regime),
        opt_lower_formula: opt_formula,
        omn_lower_formula: omn_formula,
        greedy1_lower_formula: greedy1_formula,
        patient1_lower_formula: patient1_formula,
        two_sided_in_regime,
        one_sided_in_regime,
        swapped_sides: swapped,
    }
}

/// Every theoretical bound and root for one parameterization, as one flat
/// record; serializes to a flat JSON object.
#[derive(Debug, Clone, Serialize)]
pub struct BoundSet {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub p: f64,
    pub d_a: f64,
    pub d_b: f64,

    pub k2: f64,
    pub l2: f64,
    pub k1: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub k2_lower: f64,
    pub l2_lower: f64,
    pub k1_lower: f64,
    pub k1_upper: Option<f64>,
    pub l1: f64,

    pub greedy2_upper_a: f64,
    pub greedy2_upper_b: f64,
    pub greedy2_upper_total: f64,
    pub patient2_upper_a: f64,
    pub patient2_upper_b: f64,
    pub patient2_upper_total: f64,
    pub patient2_balanced_exponent: f64,
    pub alg1_upper_a: f64,
    pub alg1_upper_b: f64,
    pub alg1_upper_total: f64,

    pub delta_lower: f64,
    pub opt_lower: f64,
    pub omn_lower: f64,
    pub greedy1_lower: f64,
    pub patient1_lower: f64,
    pub opt_lower_formula: f64,
    pub omn_lower_formula: f64,
    pub greedy1_lower_formula: f64,
    pub patient1_lower_formula: f64,

    pub root_sandwich_ok: bool,
    pub shifted_root_order_ok: bool,
    pub swapped_orientation: bool,
    pub regime_flags: Vec<String>,
}

/// The lower bound relevant to a policy: the optimal benchmark bounds the
/// greedy 2-sided loss from below, the omniscient one the patient 2-sided
/// loss, and the 1-sided policies have their own bounds.
pub fn lower_bound_for(policy: Policy, lower: &LowerBounds) -> f64 {
    match policy {
        Policy::Greedy2 => lower.opt_lower,
        Policy::Patient2 => lower.omn_lower,
        Policy::Greedy1 => lower.greedy1_lower,
        Policy::Patient1 => lower.patient1_lower,
        Policy::Inactive => lower.delta_lower,
    }
}

/// Verifies the bracketing of the plain roots for an orientation with
/// `d_a >= d_b`: `max(la-lb, la/(1+d_b)) <= k2 <= la-lb + ln(d_b+3)/p` and
/// `lb/(1+d_a) <= l2 <= (lb/d_b) ln(d_b+3)`.
pub fn root_sandwich_holds(params: MarketParams, roots: &RootSet) -> bool {
    let dens = params.densities();
    let oriented = if dens.d_a < dens.d_b {
        params.swapped()
    } else {
        params
    };
    let od = oriented.densities();
    let (la, lb, p) = (oriented.lambda_a(), oriented.lambda_b(), oriented.p());
    let (k2, l2) = if dens.d_a < dens.d_b {
        (roots.l2, roots.k2)
    } else {
        (roots.k2, roots.l2)
    };
    let tol = 1e-9 * la.max(lb);
    let k2_lo = (la - lb).max(la / (1.0 + od.d_b));
    let k2_hi = la - lb + (od.d_b + 3.0).ln() / p;
    let l2_lo = lb / (1.0 + od.d_a);
    let l2_hi = lb / od.d_b * (od.d_b + 3.0).ln();
    k2_lo - tol <= k2 && k2 <= k2_hi + tol && l2_lo - tol <= l2 && l2 <= l2_hi + tol
}

/// Verifies the strict interleaving of the shifted roots:
/// `k2 - sigma_b < k2_lower < k2`, `l2 - sigma_a < l2_lower < l2`, and
/// `k1 - sigma_b < k1_lower < k1 < k1_upper < min(k1 + sigma_b, lambda_a)`
/// whenever `k1_upper` is defined.
pub fn shifted_root_order_holds(params: MarketParams, roots: &RootSet) -> bool {
    let la = params.lambda_a();
    let tol = 1e-9 * la.max(params.lambda_b());
    let mut ok = roots.k2 - roots.sigma_b - tol < roots.k2_lower
        && roots.k2_lower < roots.k2 + tol
        && roots.l2 - roots.sigma_a - tol < roots.l2_lower
        && roots.l2_lower < roots.l2 + tol
        && roots.k1 - roots.sigma_b - tol < roots.k1_lower
        && roots.k1_lower < roots.k1 + tol;
    if let Some(k1_upper) = roots.k1_upper {
        ok = ok && roots.k1 < k1_upper + tol && k1_upper < (roots.k1 + roots.sigma_b).min(la) + tol;
    }
    ok
}

/// Assembles roots, bounds, sandwich checks, and regime flags.
pub fn bound_set(params: MarketParams) -> BoundSet {
    bound_set_with(
        params,
        default_sigma(params.lambda_a()),
        default_sigma(params.lambda_b()),
    )
}

/// [`bound_set`] with explicit deviation scales for the shifted roots.
pub fn bound_set_with(params: MarketParams, sigma_a: f64, sigma_b: f64) -> BoundSet {
    let dens = params.densities();
    let roots = solve_rootset_with(params, sigma_a, sigma_b);
    let upper = upper_bounds(params);
    let lower = lower_bounds(params);
    let mut regime_flags = Vec::new();
    if !lower.two_sided_in_regime {
        regime_flags.push("optimal_omniscient_formula_out_of_regime".to_string());
    }
    if !lower.one_sided_in_regime {
        regime_flags.push("one_sided_formula_out_of_regime".to_string());
    }
    for (name, bound) in [
        ("greedy2_upper", &upper.greedy2),
        ("patient2_upper", &upper.patient2),
        ("alg1_upper", &upper.alg1),
    ] {
        if bound.vacuous {
            regime_flags.push(format!("{name}_vacuous"));
        }
    }
    BoundSet {
        lambda_a: params.lambda_a(),
        lambda_b: params.lambda_b(),
        p: params.p(),
        d_a: dens.d_a,
        d_b: dens.d_b,
        k2: roots.k2,
        l2: roots.l2,
        k1: roots.k1,
        sigma_a: roots.sigma_a,
        sigma_b: roots.sigma_b,
        k2_lower: roots.k2_lower,
        l2_lower: roots.l2_lower,
        k1_lower: roots.k1_lower,
        k1_upper: roots.k1_upper,
        l1: roots.l1,
        greedy2_upper_a: upper.greedy2.loss_a,
        greedy2_upper_b: upper.greedy2.loss_b,
        greedy2_upper_total: upper.greedy2.total,
        patient2_upper_a: upper.patient2.loss_a,
        patient2_upper_b: upper.patient2.loss_b,
        patient2_upper_total: upper.patient2.total,
        patient2_balanced_exponent: upper.patient2_balanced_exponent,
        alg1_upper_a: upper.alg1.loss_a,
        alg1_upper_b: upper.alg1.loss_b,
        alg1_upper_total: upper.alg1.total,
        delta_lower: lower.delta_lower,
        opt_lower: lower.opt_lower,
        omn_lower: lower.omn_lower,
        greedy1_lower: lower.greedy1_lower,
        patient1_lower: lower.patient1_lower,
        opt_lower_formula: lower.opt_lower_formula,
        omn_lower_formula: lower.omn_lower_formula,
        greedy1_lower_formula: lower.greedy1_lower_formula,
        patient1_lower_formula: lower.patient1_lower_formula,
        root_sandwich_ok: root_sandwich_holds(params, &roots),
        shifted_root_order_ok: shifted_root_order_holds(params, &roots),
        swapped_orientation: upper.swapped_sides,
        regime_flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(lambda_a: f64, lambda_b: f64, p: f64) -> MarketParams {
        MarketParams::new(lambda_a, lambda_b, p).unwrap()
    }

    fn characteristic(x: f64, lhs: f64, other: f64, p: f64) -> f64 {
        x + other * (1.0 - (1.0 - p).powf(x)) - lhs
    }

    #[test]
    fn degenerate_equation_returns_lhs_exactly() {
        assert_eq!(solve_characteristic_root(37.5, 0.0, 0.3), 37.5);
    }

    #[test]
    fn bisection_agrees_with_fine_grid_scan() {
        let (lhs, other, p) = (100.0, 100.0, 0.05);
        let root = solve_characteristic_root(lhs, other, p);
        // Independent oracle: scan at step 1e-4 for the sign change.
        let step = 1e-4;
        let mut x = 0.0;
        while characteristic(x + step, lhs, other, p) < 0.0 {
            x += step;
        }
        assert!(
            root >= x && root <= x + step,
            "root {root} outside scan bracket [{x}, {}]",
            x + step
        );
        assert!((root - 26.1).abs() < 0.1);
        // Bracketing by the explicit bounds.
        assert!(100.0 / 6.0 <= root && root <= (1.0 / 0.05) * 8.0f64.ln());
    }

    #[test]
    fn root_monotonicity_in_rates() {
        let p = 0.1;
        let mut prev = 0.0;
        for la in [20.0, 40.0, 60.0, 80.0] {
            let k2 = solve_characteristic_root(la, 30.0, p);
            assert!(k2 >= prev);
            prev = k2;
        }
        let mut prev = f64::INFINITY;
        for lb in [10.0, 20.0, 40.0, 80.0] {
            let k2 = solve_characteristic_root(50.0, lb, p);
            assert!(k2 <= prev);
            prev = k2;
        }
    }

    #[test]
    fn l1_closed_forms_agree() {
        let m = params(100.0, 100.0, 0.05);
        let k1 = solve_characteristic_root(100.0, 100.0, 0.05);
        // Zero exponent pins l1 at lambda_b.
        assert!((solve_l1(m, k1, k1) - 100.0).abs() < 1e-9);
        let l1 = solve_l1(m, k1, 1.0);
        assert!((l1 - 100.0 * 0.95f64.powf(k1 - 1.0)).abs() < 1e-9 * 100.0);
        for (la, lb, p) in [(40.0, 30.0, 0.08), (75.0, 60.0, 0.04), (22.0, 20.0, 0.15)] {
            let m = params(la, lb, p);
            let k1 = solve_characteristic_root(la, lb, p);
            let sigma_a = 2.5;
            let direct = solve_l1(m, k1, sigma_a);
            let via_identity = m.survival(-sigma_a) * (lb - la + k1);
            assert!(
                (direct - via_identity).abs() <= 1e-9 * lb * m.survival(-sigma_a),
                "{la},{lb},{p}: {direct} vs {via_identity}"
            );
        }
    }

    #[test]
    fn upper_bound_arithmetic_balanced() {
        let m = MarketParams::from_densities(5.0, 5.0, 0.05).unwrap();
        let u = upper_bounds(m);
        assert!((u.greedy2.total - 2.0 * 8.0f64.ln() / 10.0).abs() < 1e-12);
        // No imbalance term on either side.
        assert!((u.greedy2.loss_a - 8.0f64.ln() / 5.0).abs() < 1e-12);
        assert!((u.greedy2.loss_a - u.greedy2.loss_b).abs() < 1e-12);
        // Patient side-b bound is exp of the balanced exponent 5/6.
        assert!((u.patient2_balanced_exponent - 5.0 / 6.0).abs() < 1e-12);
        assert!((u.patient2.loss_b - (-5.0f64 / 6.0).exp()).abs() < 1e-12);
        assert!(!u.swapped_sides);
    }

    #[test]
    fn upper_bounds_swap_orientation() {
        let m = MarketParams::from_densities(4.0, 8.0, 0.08).unwrap();
        let u = upper_bounds(m);
        let swapped = upper_bounds(m.swapped());
        assert!(u.swapped_sides);
        assert!((u.greedy2.loss_a - swapped.greedy2.loss_b).abs() < 1e-12);
        assert!((u.greedy2.loss_b - swapped.greedy2.loss_a).abs() < 1e-12);
        assert!((u.greedy2.total - swapped.greedy2.total).abs() < 1e-12);
        // The 1-sided bound does not swap: side U stays inactive, and with
        // d_a < d_b the imbalance lands on side b.
        assert!((u.alg1.loss_a - 11.0f64.ln() / 4.0).abs() < 1e-12);
        assert!((u.alg1.loss_b - (0.5 + 11.0f64.ln() / 8.0)).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_arithmetic_at_desk_scale() {
        let m = params(100.0, 100.0, 0.05);
        let l = lower_bounds(m);
        assert!(l.two_sided_in_regime && l.one_sided_in_regime);
        assert!((l.opt_lower - 1.0 / 16.75).abs() < 1e-12);
        let omn = 0.5 * 2.0 * (-5.25f64).exp() / 6.25;
        assert!((l.omn_lower - omn).abs() < 1e-12);
        assert!((l.greedy1_lower - 0.08).abs() < 1e-12);
        assert!((l.patient1_lower - 5.25f64.ln() / 10.5).abs() < 1e-12);
        assert_eq!(l.delta_lower, 0.0);
    }

    #[test]
    fn imbalance_floor_dominates_when_formulas_fall_below() {
        let m = params(200.0, 100.0, 0.05); // d_a = 10, d_b = 5
        let l = lower_bounds(m);
        assert!((l.delta_lower - 1.0 / 3.0).abs() < 1e-12);
        assert!(l.opt_lower_formula < l.delta_lower);
        assert_eq!(l.opt_lower, l.delta_lower);
    }

    #[test]
    fn out_of_regime_keeps_only_the_imbalance_floor() {
        // d_b < 1 leaves the formulas unsupported.
        let m = params(100.0, 10.0, 0.05);
        let l = lower_bounds(m);
        assert!(!l.two_sided_in_regime);
        assert!(!l.one_sided_in_regime);
        assert_eq!(l.opt_lower, l.delta_lower);
        assert_eq!(l.patient1_lower, l.delta_lower);
        // The raw formula values are still reported.
        assert!(l.opt_lower_formula > 0.0);
        let flags = bound_set(m).regime_flags;
        assert!(flags.iter().any(|f| f.contains("out_of_regime")));
    }

    #[test]
    fn vacuous_upper_bounds_are_flagged_not_clamped() {
        let m = MarketParams::from_densities(1.0, 1.0, 0.05).unwrap();
        let u = upper_bounds(m);
        assert!(u.greedy2.total > 1.0);
        assert!(u.greedy2.vacuous);
        let flags = bound_set(m).regime_flags;
        assert!(flags.iter().any(|f| f.contains("vacuous")));
    }

    #[test]
    fn cross_framework_sanity_at_desk_scale() {
        let m = params(100.0, 100.0, 0.05);
        let u = upper_bounds(m);
        let l = lower_bounds(m);
        assert!(l.opt_lower <= u.greedy2.total);
        assert!(l.omn_lower <= u.patient2.total);
        assert!(l.greedy1_lower <= u.alg1.total);
        assert!(l.patient1_lower <= u.alg1.total);
    }

    #[test]
    fn rootset_orderings_hold_at_default_sigmas() {
        for (la, lb, p) in [
            (100.0, 100.0, 0.05),
            (60.0, 40.0, 0.08),
            (30.0, 30.0, 1.0 / 6.0),
        ] {
            let m = params(la, lb, p);
            let roots = solve_rootset(m);
            assert!(root_sandwich_holds(m, &roots), "({la},{lb},{p})");
            assert!(shifted_root_order_holds(m, &roots), "({la},{lb},{p})");
        }
    }

    proptest! {
        #[test]
        fn root_residual_is_tiny(
            lhs in 1.0f64..300.0,
            other in 0.0f64..300.0,
            p in 1e-3f64..0.6,
        ) {
            let root = solve_characteristic_root(lhs, other, p);
            let residual = characteristic(root, lhs, other, p);
            prop_assert!(residual.abs() < 1e-9 * lhs, "residual {residual}");
            prop_assert!((0.0..=lhs).contains(&root));
        }
    }
}

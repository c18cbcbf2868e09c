use mixlab_core::analytic::{AxisFactor, Term};
use mixlab_core::diffops::{self, sym};
use mixlab_core::fields::{integrate_surface_with, integrate_volume_with, PART_MARGIN};
use mixlab_core::power::{rigid_velocity, sample_observers};
use mixlab_core::report::{observed_order, Check, ResidualRow, SuiteReport};
use mixlab_core::{AnalyticFieldSpec, Grid, Part, TensorSpec, Vec3, VectorSpec};

use super::Context;
use crate::plan::Suite;
use crate::CliError;

fn trig(c: f64, axes: [(char, f64, f64); 3]) -> Term {
    let mut t = Term::new(c);
    for (a, (kind, k, phase)) in axes.into_iter().enumerate() {
        let f = match kind {
            's' => AxisFactor::Sin { k, phase },
            'c' => AxisFactor::Cos { k, phase },
            _ => AxisFactor::Const,
        };
        t = t.axis(a, f);
    }
    t
}

fn scalar_field() -> AnalyticFieldSpec {
    AnalyticFieldSpec::from_terms(vec![
        trig(1.0, [('s', 1.0, 0.0), ('c', 2.0, 0.0), ('s', 1.0, 0.4)]),
        trig(0.5, [('c', 2.0, 0.1), ('-', 0.0, 0.0), ('c', 1.0, 0.0)]),
    ])
}

fn vector_field() -> VectorSpec {
    VectorSpec::new(
        AnalyticFieldSpec::from_terms(vec![trig(1.0, [('-', 0.0, 0.0), ('s', 1.0, 0.0), ('c', 1.0, 0.2)])]),
        AnalyticFieldSpec::from_terms(vec![trig(0.7, [('c', 1.0, 0.0), ('-', 0.0, 0.0), ('s', 2.0, 0.0)])]),
        AnalyticFieldSpec::from_terms(vec![
            trig(0.9, [('s', 1.0, 0.0), ('s', 1.0, 0.5), ('-', 0.0, 0.0)]),
            trig(0.3, [('-', 0.0, 0.0), ('-', 0.0, 0.0), ('c', 1.0, 0.0)]),
        ]),
    )
}

fn tensor_field() -> TensorSpec {
    let mut components: [AnalyticFieldSpec; 9] = Default::default();
    for (c, slot) in components.iter_mut().enumerate() {
        let k = 1.0 + (c % 2) as f64;
        *slot = AnalyticFieldSpec::from_terms(vec![trig(
            0.2 + 0.1 * c as f64,
            [('s', k, 0.1 * c as f64), ('c', 1.0, 0.0), ('s', 1.0, 0.3)],
        )]);
    }
    TensorSpec { components }
}

fn curl_of(g: &mixlab_core::Mat3) -> Vec3 {
    Vec3::new(g[(2, 1)] - g[(1, 2)], g[(0, 2)] - g[(2, 0)], g[(1, 0)] - g[(0, 1)])
}

struct Errors {
    grad: f64,
    div: f64,
    curl: f64,
    tensor_div: f64,
    /// Discrete divergence theorem with the nodal divergence: exact by construction.
    discrete_gap: f64,
    /// Quadrature of the exact divergence against the discrete flux.
    quadrature_gap: f64,
}

fn relative(num: f64, den: f64) -> f64 {
    num / den.max(1e-300)
}

fn errors(grid: &Grid) -> Result<Errors, CliError> {
    let f = scalar_field();
    let v = vector_field();
    let t = tensor_field();
    let fs = f.sample(grid, 0.0);
    let vs = v.sample(grid, 0.0);
    let ts = t.sample(grid, 0.0);
    let grad_exact = f.sample_gradient(grid, 0.0);
    let vgrad_exact = v.sample_gradient(grid, 0.0);
    let div_exact = vgrad_exact.map(|g| g.trace());
    let curl_exact = vgrad_exact.map(|g| curl_of(&g));
    let tdiv_exact = t.sample_divergence(grid, 0.0);

    let grad = relative((&diffops::grad(&fs) - &grad_exact).max_norm(), grad_exact.max_norm());
    let div_h = diffops::div(&vs);
    let div = relative((&div_h - &div_exact).max_norm(), div_exact.max_norm());
    let curl = relative((&diffops::curl(&vs) - &curl_exact).max_norm(), curl_exact.max_norm());
    let tensor_div = relative((&diffops::div(&ts) - &tdiv_exact).max_norm(), tdiv_exact.max_norm());

    let pi = std::f64::consts::PI;
    let part = Part::from_bounds(grid, Vec3::repeat(0.5 * pi), Vec3::new(1.5 * pi, 1.25 * pi, 1.75 * pi))?;
    let flux = integrate_surface_with(grid, &part, |n, nrm| vs.get(n).dot(&nrm));
    let discrete = integrate_volume_with(grid, &part, |n| div_h.get(n));
    let exact = integrate_volume_with(grid, &part, |n| div_exact.get(n));
    let flux_scale = flux.abs().max(exact.abs()).max(1.0);
    Ok(Errors {
        grad,
        div,
        curl,
        tensor_div,
        discrete_gap: (discrete - flux).abs() / flux_scale,
        quadrature_gap: (exact - flux).abs() / flux_scale,
    })
}

pub fn operators(ctx: &Context) -> Result<SuiteReport, CliError> {
    let tol = ctx.tol();
    let mut r = ctx.report(Suite::Operators);
    let sizes = &ctx.plan.grids;
    let grids: Vec<Grid> = sizes.iter().map(|&n| ctx.plan.grid(n)).collect();
    let errs = grids.iter().map(errors).collect::<Result<Vec<_>, _>>()?;

    type Pick = fn(&Errors) -> f64;
    let quantities: [(&str, Pick); 4] =
        [("grad", |e| e.grad), ("div", |e| e.div), ("curl", |e| e.curl), ("tensor_div", |e| e.tensor_div)];
    for (name, pick) in quantities {
        for (n, e) in sizes.iter().zip(&errs) {
            r.row(ResidualRow::new(name, "max relative error", *n, pick(e)));
        }
        for w in 0..sizes.len() - 1 {
            let order = observed_order(pick(&errs[w]), pick(&errs[w + 1]), 2.0);
            r.push(Check::within(
                format!("{name} order {}->{}", sizes[w], sizes[w + 1]),
                order,
                tol.richardson.order,
                tol.order_window,
            ));
        }
    }

    for (i, (n, e)) in sizes.iter().zip(&errs).enumerate() {
        r.row(ResidualRow::new("divergence_theorem", "discrete", *n, e.discrete_gap));
        r.row(ResidualRow::new("divergence_theorem", "quadrature", *n, e.quadrature_gap));
        r.push(Check::at_most(format!("discrete divergence theorem n={n}"), e.discrete_gap, tol.identity));
        if i > 0 {
            let (hc, hf) = (grids[i - 1].spacing(), grids[i].spacing());
            r.push(tol.richardson.check(
                format!("divergence theorem quadrature gap n={n}"),
                errs[i - 1].quadrature_gap,
                e.quadrature_gap,
                hc,
                hf,
                1.0,
            ));
        }
    }

    // Rigid velocity fields on a clamped box: curl equals twice the spin, sym grad vanishes.
    let pi = std::f64::consts::PI;
    let boxed = Grid::cell_centered_box(sizes[0], 0.0, 2.0 * pi, PART_MARGIN)?;
    let pivot = Vec3::repeat(pi);
    let interior = Part::new(&boxed, [PART_MARGIN; 3], boxed.dims().map(|d| d - PART_MARGIN))?;
    let mut curl_worst = 0.0_f64;
    let mut sym_worst = 0.0_f64;
    for (k, o) in sample_observers(ctx.seed(), 10, pivot).iter().skip(6).enumerate() {
        let v = rigid_velocity(o, &boxed, 0.0);
        let scale = v.max_norm().max(1.0);
        let spin = o.rotation_at(0.0);
        let c = diffops::curl(&v);
        let g = diffops::grad(&v);
        let ce = interior.nodes(&boxed).map(|n| (c.get(n) - spin * 2.0).norm()).fold(0.0, f64::max) / scale;
        let se = interior.nodes(&boxed).map(|n| sym(&g.get(n)).norm()).fold(0.0, f64::max) / scale;
        r.row(ResidualRow::new("rigid_curl", format!("observer {k}"), sizes[0], ce));
        r.row(ResidualRow::new("rigid_sym_grad", format!("observer {k}"), sizes[0], se));
        curl_worst = curl_worst.max(ce);
        sym_worst = sym_worst.max(se);
    }
    r.push(Check::at_most("rigid curl equals twice the spin", curl_worst, tol.identity));
    r.push(Check::at_most("rigid sym grad vanishes", sym_worst, tol.identity));
    Ok(r.finish())
}

// quick fixture scan
use balred::gramians::{exact_gramians, gramian_diagonals_report};
use balred::hankel::hankel_from_markov;
use balred::lti::{make_system, random_stable_system, StateSpaceModel};
use balred::plant::{build_plant, PlantConfig};
use balred::reduction::{era_reduce, fit_pseudo_modes, pseudo_reduce, svd_truncate, DEFAULT_RANK_TOL, PSEUDO_MODE_CAP};
use balred::sampling::{collect_markov_pairs, collect_primal, fit_output_projector_from_markov};
use nalgebra::DMatrix;

fn decay_steps(model: &StateSpaceModel, tol: f64) -> usize {
    let b_norm = model.b().norm();
    let mut x = model.b().clone();
    let mut k = 0usize;
    while x.norm() >= tol * b_norm && k < 100_000 { x = model.a() * &x; k += 1; }
    k.max(1)
}

fn main() {
    // Gap fixture: strong 4-state subsystem + weak 4-state subsystem.
    let s1 = random_stable_system(4, 1, 1, 0.8, 1).unwrap();
    let s2 = random_stable_system(4, 1, 1, 0.5, 2).unwrap();
    let n = 8;
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (4, 4)).copy_from(s1.a());
    a.view_mut((4, 4), (4, 4)).copy_from(s2.a());
    let mut b = DMatrix::zeros(n, 1);
    b.view_mut((0, 0), (4, 1)).copy_from(s1.b());
    b.view_mut((4, 0), (4, 1)).copy_from(&(s2.b() * 1e-4));
    let mut c = DMatrix::zeros(1, n);
    c.view_mut((0, 0), (1, 4)).copy_from(s1.c());
    c.view_mut((0, 4), (1, 4)).copy_from(&(s2.c() * 1e-4));
    let model = make_system(a, b, c, true).unwrap();
    let m = decay_steps(&model, 1e-12);
    let seq = collect_markov_pairs(&model, m, m, 1, None).unwrap();
    let pair = hankel_from_markov(&seq, m, m, 1).unwrap();
    let svd = svd_truncate(pair.h(), None, DEFAULT_RANK_TOL).unwrap();
    println!("gap fixture: n1={} sigma={:?}", svd.retained(), svd.sigma());
    let rom = era_reduce(&pair, &svd, 4, None).unwrap();
    let worst = gramian_diagonals_report(&rom).unwrap().iter().map(|row| {
        ((row.wc_diag - row.hsv).abs() / row.hsv).max((row.wo_diag - row.hsv).abs() / row.hsv)
    }).fold(0.0f64, f64::max);
    println!("gap diag at r=4: worst {worst:.2e}");

    // Violation metrics on the subsampled plant.
    let config = PlantConfig { nx: 16, ny: 16, nu: 0.03, cx: 1.08, cy: 0.15, fx: 8.0, fy: 3.5, width: 1.8, dt: 1.0 };
    let plant = build_plant(&config).unwrap();
    let (mm, period) = (110usize, 2usize);
    let raw = collect_markov_pairs(&plant, mm, mm, period, None).unwrap();
    let projector = fit_output_projector_from_markov(&raw, 20).unwrap();
    let pseq = raw.projected(&projector).unwrap();
    let ppair = hankel_from_markov(&pseq, mm, mm, period).unwrap();
    let psvd = svd_truncate(ppair.h(), None, DEFAULT_RANK_TOL).unwrap();
    let x = collect_primal(&plant, mm, period).unwrap();
    let r = 10;
    let era = era_reduce(&ppair, &psvd, r, Some(&projector)).unwrap();
    let pmodes = fit_pseudo_modes(&x, &psvd, PSEUDO_MODE_CAP).unwrap();
    let pseudo = pseudo_reduce(&plant, &pmodes.truncated(r).unwrap(), Some(&projector)).unwrap();
    for (name, rom) in [("era", &era), ("pseudo", &pseudo)] {
        let g = exact_gramians(&rom.to_model().unwrap()).unwrap();
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(rom.hsv().to_vec()));
        let balance = ((g.w_c() - &sigma).norm() + (g.w_o() - &sigma).norm()) / sigma.norm();
        let mut off = 0.0f64;
        for i in 0..r { for j in 0..r { if i != j { off = off.max(g.w_c()[(i,j)].abs().max(g.w_o()[(i,j)].abs())); } } }
        let offrel = off / g.w_c().diagonal().amax().max(g.w_o().diagonal().amax());
        println!("{name}: balance-defect {balance:.3e}, offdiag/diag {offrel:.3e}");
    }
}

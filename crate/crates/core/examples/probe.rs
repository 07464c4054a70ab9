// Scratch calibration runs; removed once the acceptance fixtures are frozen.

use balred::eval::{self, log_frequency_grid};
use balred::gramians;
use balred::hankel::{hankel_from_markov, hankel_from_snapshots};
use balred::lti::{self, random_stable_system};
use balred::plant::{build_plant, PlantConfig};
use balred::reduction::{
    self, bpod_modes, bpod_reduce, era_reduce, pod_reduce, primal_modes, pseudo_adjoint_modes,
    pseudo_reduce, svd_truncate,
};
use balred::sampling::{
    collect_adjoint, collect_markov_pairs, collect_primal, fit_output_projector_from_markov,
};
use std::time::Instant;

fn horizon_for(model: &balred::StateSpaceModel, tol: f64) -> usize {
    let b_norm = model.b().norm();
    let mut x = model.b().clone();
    let mut k = 0;
    while x.norm() >= tol * b_norm && k < 100_000 {
        x = model.a() * &x;
        k += 1;
    }
    k.max(1)
}

fn plant_probe(nu: f64, cx: f64, cy: f64, dt: f64, m_out: usize, fx: f64, fy: f64, width: f64, msub: usize, period_override: Option<usize>) {
    let config = PlantConfig {
        nx: 16,
        ny: 16,
        nu,
        cx,
        cy,
        fx,
        fy,
        width,
        dt,
    };
    let t0 = Instant::now();
    let plant = match build_plant(&config) {
        Ok(p) => p,
        Err(e) => {
            println!("plant nu={nu} cx={cx} cy={cy} dt={dt}: {e}");
            return;
        }
    };
    println!(
        "plant nu={nu} cx={cx} cy={cy} dt={dt}: rho={:.4}",
        plant.spectral_radius()
    );
    let steps = horizon_for(&plant, 1e-10);
    let (period, m) = match period_override {
        Some(p) => (p, msub),
        None => {
            let p = steps.div_ceil(msub);
            (p, steps.div_ceil(p))
        }
    };
    println!("  horizon(1e-8)={steps} -> P={period}, m_c=m_o={m}");

    let raw = collect_markov_pairs(&plant, m, m, period, None).unwrap();
    let proj = fit_output_projector_from_markov(&raw, m_out).unwrap();
    let seq = raw.projected(&proj).unwrap();
    let pair_era = hankel_from_markov(&seq, m, m, period).unwrap();
    let svd_era = svd_truncate(pair_era.h(), None, 1e-10).unwrap();
    println!(
        "  era hankel {}x{}, n1={}, sigma1={:.3e}, sigma20/sigma1={:.3e}",
        pair_era.h().nrows(),
        pair_era.h().ncols(),
        svd_era.numerical_rank(),
        svd_era.sigma()[0],
        svd_era.sigma().get(19).copied().unwrap_or(0.0) / svd_era.sigma()[0],
    );

    let x = collect_primal(&plant, m, period).unwrap();
    let y = collect_adjoint(&plant, m, period, Some(&proj)).unwrap();
    let pair_bpod = hankel_from_snapshots(&x, &y, &plant).unwrap();
    let svd_bpod = svd_truncate(pair_bpod.h(), None, 1e-10).unwrap();

    let n_pseudo = svd_era.retained().min(100);
    let phi_1 = primal_modes(&x, &svd_era, n_pseudo).unwrap();
    let pseudo_full = pseudo_adjoint_modes(&phi_1)
        .unwrap()
        .with_hsv(svd_era.sigma().iter().take(n_pseudo).copied().collect());

    let k_max = eval::decay_horizon(&plant, 1e-8).unwrap();
    let full_trace = eval::impulse_trace(&plant, k_max, None).unwrap();
    let lb = eval::lower_bound_error(&plant, &proj, Some(k_max)).unwrap();
    println!("  k_max={k_max}, lower_bound={lb:.6e}");

    let s = svd_era.sigma();
    let s1 = s[0];
    print!("  sigma decay:");
    for i in [4usize, 9, 14, 19, 24, 29] {
        if i < s.len() {
            print!(" s{}={:.1e}", i + 1, s[i] / s1);
        }
    }
    println!();

    // How differently POD and balancing order the state directions.
    let pod_svd = svd_truncate(x.data(), None, 1e-12).unwrap();
    print!("  pod sigma^2/hankel sigma:");
    for i in [0usize, 4, 9, 14] {
        if i < s.len() && i < pod_svd.sigma().len() {
            print!(
                " i{}={:.2e}",
                i + 1,
                pod_svd.sigma()[i] * pod_svd.sigma()[i] / s[i]
            );
        }
    }
    println!();
    for r in [5usize, 10, 15] {
        if r > svd_era.retained().min(pod_svd.retained()) {
            continue;
        }
        let phi_bal = primal_modes(&x, &svd_era, r).unwrap();
        let phi_bal_q = phi_bal.qr().q();
        let pod_q = pod_svd.u().columns(0, r).clone_owned();
        let overlap = phi_bal_q.transpose() * &pod_q;
        let ov_svd = svd_truncate(&overlap, None, 1e-14).unwrap();
        let min_cos = ov_svd.sigma().last().copied().unwrap_or(0.0);
        println!("  r={r}: smallest principal cosine(POD_r, BAL_r) = {min_cos:.4}");
    }

    println!("  r    era          bpod         pseudo       pod          era/lb");
    let mut ok_rank = true;
    let mut some_ratio = 0.0f64;
    let r_hi = (m_out + 6).min(svd_era.retained()).min(svd_bpod.retained());
    for r in 2..=r_hi {
        let era = era_reduce(&pair_era, &svd_era, r, Some(&proj)).unwrap();
        let modes = bpod_modes(&x, &y, &svd_bpod, r).unwrap();
        let bpod = bpod_reduce(&plant, &modes, Some(&proj)).unwrap();
        let pseudo = pseudo_reduce(&plant, &pseudo_full.truncated(r).unwrap(), Some(&proj)).unwrap();
        let pod = pod_reduce(&x, &plant, r, Some(&proj)).unwrap();

        let h2 = |rom: &balred::ReducedModel| -> f64 {
            let tr = eval::impulse_trace(&rom.to_model().unwrap(), k_max, None).unwrap();
            let emb = tr.map_blocks(|g| proj.theta() * g);
            eval::h2_error(&full_trace, &emb).unwrap().value
        };
        let (e_era, e_bpod, e_pseudo, e_pod) = (h2(&era), h2(&bpod), h2(&pseudo), h2(&pod));
        let rho_era = era.to_model().unwrap().spectral_radius();
        if rho_era >= 1.0 {
            println!("  (era r={r} rho={rho_era:.6})");
        }
        if e_era > e_pseudo || e_era > e_pod {
            ok_rank = false;
        }
        some_ratio = some_ratio.max((e_pseudo / e_era).min(e_pod / e_era));
        let excess = (e_era * e_era - lb * lb).max(0.0).sqrt();
        println!(
            "  {r:3}  {e_era:.5e}  {e_bpod:.5e}  {e_pseudo:.5e}  {e_pod:.5e}  {:.4}  ex={excess:.3e}",
            e_era / lb
        );
    }
    println!(
        "  ranking ok at all orders: {ok_rank}; max min-ratio: {some_ratio:.2}; took {:?}",
        t0.elapsed()
    );

    // Gramian-diagonal balance of the mid-order models.
    for r in [10usize] {
        let era = era_reduce(&pair_era, &svd_era, r, Some(&proj)).unwrap();
        let pseudo =
            pseudo_reduce(&plant, &pseudo_full.truncated(r).unwrap(), Some(&proj)).unwrap();
        for (name, rom) in [("era", &era), ("pseudo", &pseudo)] {
            match gramians::gramian_diagonals_report(rom) {
                Ok(rows) => {
                    let worst_ratio = rows
                        .iter()
                        .map(|row| (row.wc_diag / row.wo_diag).max(row.wo_diag / row.wc_diag))
                        .fold(0.0f64, f64::max);
                    let hsv_dev = rows
                        .iter()
                        .map(|row| {
                            ((row.wc_diag - row.hsv).abs() / row.hsv)
                                .max((row.wo_diag - row.hsv).abs() / row.hsv)
                        })
                        .fold(0.0f64, f64::max);
                    println!(
                        "  {name} r={r}: max wc/wo ratio={worst_ratio:.2} hsv dev={hsv_dev:.2e}"
                    );
                }
                Err(e) => println!("  {name} r={r}: {e}"),
            }
        }
    }
}

fn equivalence_probe() {
    // (n, p, q, rho, P) grid candidates.
    let grid: Vec<(usize, usize, usize, f64, usize, u64)> = vec![
        (5, 1, 1, 0.5, 1, 101),
        (5, 3, 3, 0.9, 1, 102),
        (5, 1, 3, 0.9, 5, 103),
        (5, 3, 1, 0.5, 5, 104),
        (20, 1, 1, 0.9, 1, 105),
        (20, 3, 3, 0.5, 1, 106),
        (20, 3, 1, 0.9, 5, 107),
        (20, 1, 3, 0.5, 5, 108),
        (100, 1, 1, 0.5, 1, 109),
        (100, 3, 3, 0.9, 5, 110),
        (100, 1, 3, 0.9, 5, 111),
        (100, 3, 1, 0.5, 1, 112),
        (5, 1, 1, 0.9, 5, 113),
        (20, 3, 3, 0.9, 5, 114),
        (100, 1, 1, 0.9, 5, 115),
        (5, 3, 3, 0.5, 1, 116),
        (20, 1, 1, 0.5, 5, 117),
        (100, 3, 3, 0.5, 5, 118),
        (20, 1, 3, 0.9, 1, 119),
        (100, 1, 3, 0.5, 1, 120),
    ];
    let t_all = Instant::now();
    let mut worst_eq = 0.0f64;
    let mut worst_hsv = 0.0f64;
    let mut worst_fr: f64 = 0.0;
    let mut worst_fr_rel: f64 = 0.0;
    for (n, p, q, rho, period, seed) in grid {
        let t0 = Instant::now();
        let m = random_stable_system(n, p, q, rho, seed).unwrap();
        let steps = horizon_for(&m, 1e-12);
        let m_c = steps.div_ceil(period);
        let x = collect_primal(&m, m_c, period).unwrap();
        let y = collect_adjoint(&m, m_c, period, None).unwrap();
        let pair_b = hankel_from_snapshots(&x, &y, &m).unwrap();
        let svd_b = svd_truncate(pair_b.h(), None, 1e-10).unwrap();
        let seq = collect_markov_pairs(&m, m_c, m_c, period, None).unwrap();
        let pair_e = hankel_from_markov(&seq, m_c, m_c, period).unwrap();
        let svd_e = svd_truncate(pair_e.h(), None, 1e-10).unwrap();

        let r = reduction::select_order(svd_e.sigma(), None).min(svd_b.retained());
        let era = era_reduce(&pair_e, &svd_e, r, None).unwrap();
        let modes = bpod_modes(&x, &y, &svd_b, r).unwrap();
        let bpod = bpod_reduce(&m, &modes, None).unwrap();

        let scale = |a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>| -> f64 {
            let s = a
                .iter()
                .chain(b.iter())
                .fold(0.0f64, |acc, &v| acc.max(v.abs()))
                .max(1e-300);
            (a - b).iter().fold(0.0f64, |acc, &v| acc.max(v.abs())) / s
        };
        let eq = scale(era.a_r(), bpod.a_r())
            .max(scale(era.b_r(), bpod.b_r()))
            .max(scale(era.c_r(), bpod.c_r()));
        worst_eq = worst_eq.max(eq);

        // HSV comparison against the sampled-system oracle.
        let sampled = gramians::sampled_system(&m, period).unwrap();
        let exact_hsv = gramians::exact_hankel_singular_values(&sampled).unwrap();
        let mut hsv_err = 0.0f64;
        for i in 0..r {
            hsv_err = hsv_err.max((svd_e.sigma()[i] - exact_hsv[i]).abs() / exact_hsv[i]);
        }
        worst_hsv = worst_hsv.max(hsv_err);

        // Frequency response of the r-mode ERA model vs the sampled BT oracle.
        let bt = gramians::exact_balanced_truncation_sampled(&m, period, r).unwrap();
        let freqs = log_frequency_grid(100, 1e-3);
        let g_era = eval::frequency_response(&era.to_model().unwrap(), &freqs).unwrap();
        let g_bt = eval::frequency_response(&bt.to_model().unwrap(), &freqs).unwrap();
        let peak = g_bt.gains().iter().copied().fold(0.0f64, f64::max);
        let mut fr = 0.0f64;
        let mut fr_rel = 0.0f64;
        for i in 0..freqs.len() {
            let d = (g_era.gains()[i] - g_bt.gains()[i]).abs();
            fr = fr.max(d / peak);
            fr_rel = fr_rel.max(d / g_bt.gains()[i]);
        }
        worst_fr = worst_fr.max(fr);
        worst_fr_rel = worst_fr_rel.max(fr_rel);

        println!(
            "n={n:3} p={p} q={q} rho={rho} P={period}: m_c={m_c:3} r={r:2} eq={eq:.2e} hsv={hsv_err:.2e} fr_peak={fr:.2e} fr_point={fr_rel:.2e} ({:?})",
            t0.elapsed()
        );
    }
    println!(
        "worst: eq={worst_eq:.3e} hsv={worst_hsv:.3e} fr_peak={worst_fr:.3e} fr_point={worst_fr_rel:.3e}, total {:?}",
        t_all.elapsed()
    );
}

fn m3_probe() {
    // Fig-1-style random snapshot fixture: rank(X) < rank(Y) < n.
    use balred::sampling::{SnapshotKind, SnapshotMatrix};
    use rand::{Rng, SeedableRng};
    let n = 60;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(303);
    let x_data = nalgebra::DMatrix::from_fn(n, 10, |_, _| rng.gen_range(-1.0..1.0));
    let y_data = nalgebra::DMatrix::from_fn(n, 14, |_, _| rng.gen_range(-1.0..1.0));
    let x = SnapshotMatrix::new(x_data, 1, 1, SnapshotKind::Primal).unwrap();
    let y = SnapshotMatrix::new(y_data, 1, 1, SnapshotKind::Adjoint).unwrap();
    let h = y.data().transpose() * x.data();
    let svd = svd_truncate(&h, None, 1e-10).unwrap();
    let n1 = svd.retained();
    println!("random fixture: n1={n1}, sigma1={:.3e}", svd.sigma()[0]);

    let modes = bpod_modes(&x, &y, &svd, n1).unwrap();
    let phi_1 = modes.phi().clone();
    let psi_true = modes.psi().clone();

    let pseudo = pseudo_adjoint_modes(&phi_1).unwrap();
    let trans = gramians::build_full_transformation(pseudo.phi(), pseudo.psi()).unwrap();
    let grams = gramians::empirical_gramians(&x, &y).unwrap();
    let diag =
        gramians::transformed_gramians(&trans, &grams, svd.sigma(), Some(&psi_true)).unwrap();
    let m3 = diag.m3();
    let m3_ind = diag.m3_independent().unwrap().clone();
    println!(
        "  |M3|_F={:.4e} vs 0.1*sigma1={:.4e}; m3 match={:.3e}",
        m3.norm(),
        0.1 * svd.sigma()[0],
        (m3.clone() - m3_ind).norm() / m3.norm().max(1e-300)
    );
    let wc = diag.wc_blocks();
    let wo = diag.wo_blocks();
    let prod = diag.product_blocks();
    println!(
        "  pseudo: wc cross={:.2e} wo cross={:.2e} prod lower-right={:.2e} prod cross={:.2e}",
        wc[1].norm().max(wc[2].norm()),
        wo[1].norm(),
        prod[3].norm(),
        prod[1].norm(),
    );

    // True-adjoint transformation on the same data.
    let trans_true = gramians::build_full_transformation(modes.phi(), modes.psi()).unwrap();
    let diag_true =
        gramians::transformed_gramians(&trans_true, &grams, svd.sigma(), None).unwrap();
    let wc = diag_true.wc_blocks();
    let wo = diag_true.wo_blocks();
    let prod = diag_true.product_blocks();
    let s1 = svd.sigma()[0];
    println!(
        "  true: wc cross={:.2e} wo cross={:.2e} prod cross={:.2e} prod lr={:.2e} (x sigma1={s1:.2e})",
        wc[1].norm().max(wc[2].norm()),
        wo[1].norm().max(wo[2].norm()),
        prod[1].norm().max(prod[2].norm()),
        prod[3].norm(),
    );

    // Footnote case: rank(X) > rank(Y) breaks the controllability block
    // structure under pseudo modes.
    let xf_data = nalgebra::DMatrix::from_fn(n, 14, |_, _| rng.gen_range(-1.0..1.0));
    let yf_data = nalgebra::DMatrix::from_fn(n, 10, |_, _| rng.gen_range(-1.0..1.0));
    let xf = SnapshotMatrix::new(xf_data, 1, 1, SnapshotKind::Primal).unwrap();
    let yf = SnapshotMatrix::new(yf_data, 1, 1, SnapshotKind::Adjoint).unwrap();
    let hf = yf.data().transpose() * xf.data();
    let svd_f = svd_truncate(&hf, None, 1e-10).unwrap();
    let n1f = svd_f.retained();
    let modes_f = bpod_modes(&xf, &yf, &svd_f, n1f).unwrap();
    let pseudo_f = pseudo_adjoint_modes(modes_f.phi()).unwrap();
    let trans_f = gramians::build_full_transformation(pseudo_f.phi(), pseudo_f.psi()).unwrap();
    let grams_f = gramians::empirical_gramians(&xf, &yf).unwrap();
    let diag_f = gramians::transformed_gramians(&trans_f, &grams_f, svd_f.sigma(), None).unwrap();
    let wc_f = diag_f.wc_blocks();
    println!(
        "  footnote rank(X)>rank(Y): n1={} wc cross={:.3e} (sigma1={:.3e}), upper-left dev={:.3e}",
        n1f,
        wc_f[1].norm().max(wc_f[2].norm()),
        svd_f.sigma()[0],
        (wc_f[0].clone() - nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(svd_f.sigma().to_vec()))).norm(),
    );

    // Off-diagonal violation ratio between pseudo and era on the s2 fixture.
    let s2 = lti::make_system(
        nalgebra::DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 0.6]),
        nalgebra::DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        nalgebra::DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        true,
    )
    .unwrap();
    let (m_c, period) = (60, 1);
    let xs = collect_primal(&s2, m_c, period).unwrap();
    let seq = collect_markov_pairs(&s2, m_c, m_c, period, None).unwrap();
    let era_pair = hankel_from_markov(&seq, m_c, m_c, period).unwrap();
    let svd_e = svd_truncate(era_pair.h(), None, 1e-10).unwrap();
    let era = era_reduce(&era_pair, &svd_e, 2, None).unwrap();
    let phi_s2 = primal_modes(&xs, &svd_e, 2).unwrap();
    let pseudo_s2 = pseudo_adjoint_modes(&phi_s2)
        .unwrap()
        .with_hsv(svd_e.sigma().to_vec());
    let pseudo_rom = pseudo_reduce(&s2, &pseudo_s2, None).unwrap();
    let offdiag = |rom: &balred::ReducedModel| -> f64 {
        let grams = gramians::exact_gramians(&rom.to_model().unwrap()).unwrap();
        let mut v = 0.0f64;
        for i in 0..rom.order() {
            for j in 0..rom.order() {
                if i != j {
                    v = v.max(grams.w_c()[(i, j)].abs().max(grams.w_o()[(i, j)].abs()));
                }
            }
        }
        v
    };
    let (v_era, v_pseudo) = (offdiag(&era), offdiag(&pseudo_rom));
    println!("  s2 offdiag: era={v_era:.3e} pseudo={v_pseudo:.3e} ratio={:.1e}", v_pseudo / v_era);
}

fn welch_probe() {
    for sys_seed in [1u64, 2, 3] {
        let m = random_stable_system(2, 1, 1, 0.6, sys_seed).unwrap();
        for noise_seed in [7u64, 42, 101, 2024] {
            let mut meds = Vec::new();
            for k_exp in [16usize, 18] {
                let est = eval::spectral_estimate(&m, 1 << k_exp, noise_seed, None).unwrap();
                let direct = eval::frequency_response(&m, est.frequencies()).unwrap();
                let mut errs: Vec<f64> = est
                    .gains()
                    .iter()
                    .zip(direct.gains())
                    .map(|(e, d)| (e - d).abs() / d)
                    .collect();
                errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                meds.push(errs[errs.len() / 2]);
            }
            println!(
                "sys={sys_seed} noise={noise_seed}: med16={:.3e} med18={:.3e} ratio={:.3}",
                meds[0], meds[1], meds[1] / meds[0]
            );
        }
    }
    let m = random_stable_system(1, 1, 1, 0.5, 1).unwrap();
    for k_exp in [16usize, 18] {
        let est = eval::spectral_estimate(&m, 1 << k_exp, 42, None).unwrap();
        let direct = eval::frequency_response(&m, est.frequencies()).unwrap();
        let mut errs: Vec<f64> = est
            .gains()
            .iter()
            .zip(direct.gains())
            .map(|(e, d)| (e - d).abs() / d)
            .collect();
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!(
            "scalar K=2^{k_exp}: median rel err={:.3e}, p90={:.3e}",
            errs[errs.len() / 2],
            errs[(errs.len() * 9) / 10]
        );
    }
    let t0 = Instant::now();
    let est = eval::spectral_estimate(&m, 500_000, 42, None).unwrap();
    let direct = eval::frequency_response(&m, est.frequencies()).unwrap();
    println!(
        "scalar K=5e5 first-bin: est={:.5} direct={:.5} ({:?})",
        est.gains()[0],
        direct.gains()[0],
        t0.elapsed()
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    match args.get(1).map(String::as_str) {
        Some("plant") => {
            let nu: f64 = args[2].parse().unwrap();
            let cx: f64 = args[3].parse().unwrap();
            let cy: f64 = args[4].parse().unwrap();
            let dt: f64 = args[5].parse().unwrap();
            let fx: f64 = args.get(6).map_or(3.0, |s| s.parse().unwrap());
            let fy: f64 = args.get(7).map_or(7.5, |s| s.parse().unwrap());
            let width: f64 = args.get(8).map_or(1.5, |s| s.parse().unwrap());
            let msub: usize = args.get(9).map_or(200, |s| s.parse().unwrap());
            let p_over: Option<usize> = args.get(10).map(|s| s.parse().unwrap());
            plant_probe(nu, cx, cy, dt, 20, fx, fy, width, msub, p_over);
        }
        Some("equiv") => equivalence_probe(),
        Some("m3") => m3_probe(),
        Some("welch") => welch_probe(),
        _ => {
            println!("usage: probe plant <nu> <cx> <cy> <dt> | equiv | m3 | welch");
        }
    }
}

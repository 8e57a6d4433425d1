//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach stdout.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::hint::black_box;
use std::time::{Duration, Instant};

use cohrank::decompose::{fock_fidelity, squeezed_vacuum_fock_amplitudes};
use cohrank::input::squeezed_fidelity;
use cohrank::{
    apply_circuit, apply_creation_polynomial, apply_creation_postselect, apply_transfer,
    beamsplitter_matrix, compose_circuit, conditional_samples, decompose_fock,
    decompose_fock_product, decompose_squeezed_vacuum, estimate_norm_mc, fidelity,
    fock_amplitude, fock_probability, haar_random_transfer, metropolis_samples, norm_squared,
    oracle_amplitude, oracle_distribution, term_overlaps, transition_amplitude,
    transition_amplitude_directed, wigner_negativity, CircuitElement, CoherentSuperposition,
    CoherentLabel, Direction, FockOutcome, NormMethod, QuadratureGrid, SamplerConfig, SqueezeParams,
    WignerSource, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn ones(n: usize) -> FockOutcome {
    FockOutcome::new(vec![1; n])
}

fn boson_sampling() -> Outcome {
    let start = Instant::now();
    let eps = 0.2;
    let f1 = fock_fidelity(1, eps).map_err(err)?;
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    for n in [3usize, 4, 6] {
        let u = haar_random_transfer(n, 1000 + n as u64).map_err(err)?;
        let psi = apply_transfer(&decompose_fock_product(&vec![1; n], eps).map_err(err)?, &u).map_err(err)?;
        for (out, p) in oracle_distribution(&ones(n), &u).map_err(err)? {
            let q = fock_probability(&psi, &out).map_err(err)?;
            worst = worst.max((q - p).abs());
            rows += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        worst < 1e-3 && f1 > 0.999 && elapsed < Duration::from_secs(60),
        format!("{rows} outcomes, max |dP| = {worst:.2e}, single-photon fidelity {f1:.6}, {:.2?}", elapsed),
    )
}

fn fidelity_law() -> Outcome {
    let eps = [0.1, 0.2, 0.4];
    let mut details = Vec::new();
    let mut ok = true;
    for n in 1..=3usize {
        let mut ys = Vec::new();
        for &e in &eps {
            let psi = decompose_fock(n, e).map_err(err)?;
            let mut counts = vec![0; 1];
            counts[0] = n;
            let f = fock_probability(&psi, &FockOutcome::new(counts)).map_err(err)?;
            ys.push((1.0 - f).ln());
        }
        let xs: Vec<f64> = eps.iter().map(|e: &f64| e.ln()).collect();
        let s = slope(&xs, &ys);
        let target = 2.0 * (n as f64 + 1.0);
        ok &= (s - target).abs() <= 0.05 * target;
        details.push(format!("n={n} slope {s:.3} (target {target})"));
    }
    check(ok, details.join(", "))
}

fn wigner_closed_forms() -> Outcome {
    let grid = QuadratureGrid::default();
    let w1 = wigner_negativity(&WignerSource::Fock(1), &grid).map_err(err)?;
    let w2 = wigner_negativity(&WignerSource::Fock(2), &grid).map_err(err)?;
    let (d1, d2) = ((w1.integral - 1.42612264).abs(), (w2.integral - 1.72898926).abs());
    check(
        d1 <= 1e-6 && d2 <= 1e-6,
        format!("|W1| = {:.9} (dev {d1:.1e}), |W2| = {:.9} (dev {d2:.1e})", w1.integral, w2.integral),
    )
}

fn norm_estimation() -> Outcome {
    let half = decompose_fock(2, 0.35).map_err(err)?.scale(C64::new(0.5, 0.0));
    let cfg = SamplerConfig { seed: 7, steps: 750_000, radius: 3.0, ..Default::default() };
    let est = estimate_norm_mc(&half, &cfg).map_err(err)?;
    let rel = (est.estimate - 0.25).abs() / 0.25;

    let mut fits = Vec::new();
    let mut positive = true;
    for radius in [2.0f64, 3.0] {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for m in 1..=4usize {
            let state = decompose_fock_product(&vec![1; m], 0.2).map_err(err)?.scale(C64::new(0.5, 0.0));
            let cfg = SamplerConfig { seed: 11 + m as u64, steps: 200_000, radius, ..Default::default() };
            let e = estimate_norm_mc(&state, &cfg).map_err(err)?;
            xs.push(m as f64 * radius.ln());
            ys.push(e.stdev.ln());
        }
        let c = slope(&xs, &ys);
        positive &= c > 0.0;
        fits.push(format!("L={radius}: c={c:.3}"));
    }
    check(
        rel < 0.01 && positive,
        format!(
            "estimate {:.5} +- {:.5} (rel dev {:.2}%), sigma fits {}",
            est.estimate,
            est.stderr,
            100.0 * rel,
            fits.join(", ")
        ),
    )
}

fn hong_ou_mandel() -> Outcome {
    let bs = beamsplitter_matrix(PI / 2.0, 0.0, 0, 1, 2).map_err(err)?;
    let psi = apply_transfer(&decompose_fock_product(&[1, 1], 0.2).map_err(err)?, &bs).map_err(err)?;
    let coherent = fock_amplitude(&psi, &FockOutcome::new(vec![1, 1])).map_err(err)?.norm();
    let oracle = oracle_amplitude(&ones(2), &bs, &ones(2)).map_err(err)?.norm();
    check(coherent < 1e-3 && oracle <= 1e-12, format!("coherent {coherent:.2e}, oracle {oracle:.2e}"))
}

fn squeezed() -> Outcome {
    let mut out = Vec::new();
    let mut ok = true;
    for (terms, bound) in [(4usize, 0.99), (1, 0.9)] {
        let params = SqueezeParams::new(0.882, 0.0, terms).map_err(err)?;
        let psi = decompose_squeezed_vacuum(&params).map_err(err)?;
        let f = squeezed_fidelity(&psi, &params).map_err(err)?;
        ok &= f > bound && psi.rank() == 2 * terms;
        out.push(format!("{} states: F = {f:.5} (> {bound})", psi.rank()));
    }
    // the 200-photon reference is itself normalized to within rounding
    let tail: f64 = squeezed_vacuum_fock_amplitudes(0.882, 0.0, 200).iter().map(|a| a.norm_sqr()).sum();
    ok &= (tail - 1.0).abs() < 1e-12;
    check(ok, out.join(", "))
}

fn random_element(rng: &mut ChaCha8Rng, m: usize) -> CircuitElement {
    match rng.random_range(0..4) {
        0 => {
            let i = rng.random_range(0..m);
            let j = (i + rng.random_range(1..m)) % m;
            CircuitElement::Bs { theta: rng.random_range(0.0..2.0 * PI), phi: rng.random_range(0.0..2.0 * PI), modes: [i, j] }
        }
        1 => CircuitElement::Ps { phi: rng.random_range(0.0..2.0 * PI), mode: rng.random_range(0..m) },
        2 => CircuitElement::Disp {
            beta: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            mode: rng.random_range(0..m),
        },
        _ => CircuitElement::Haar { seed: rng.random() },
    }
}

fn free_operations() -> Outcome {
    let m = 6;
    let k = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let amps: Vec<C64> = (0..k).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let labels: Vec<C64> = (0..k * m).map(|_| C64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5))).collect();
    let psi = CoherentSuperposition::from_parts(m, amps, labels).map_err(err)?;
    let norm = norm_squared(&psi);
    let overlaps = term_overlaps(&psi);
    let (mut rank_ok, mut worst_norm, mut worst_overlap) = (true, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let len = rng.random_range(1..20);
        let elements: Vec<CircuitElement> = (0..len).map(|_| random_element(&mut rng, m)).collect();
        let out = apply_circuit(&psi, &compose_circuit(&elements, m).map_err(err)?).map_err(err)?;
        rank_ok &= out.rank() == psi.rank();
        worst_norm = worst_norm.max((norm_squared(&out) - norm).abs());
        for (a, b) in overlaps.iter().zip(term_overlaps(&out)) {
            worst_overlap = worst_overlap.max((a - b).norm());
        }
    }
    check(
        rank_ok && worst_norm <= 1e-9 && worst_overlap <= 1e-10,
        format!("rank preserved {rank_ok}, max norm dev {worst_norm:.1e}, max overlap dev {worst_overlap:.1e}"),
    )
}

fn creation_operator() -> Outcome {
    let vac = CoherentSuperposition::vacuum(1);
    let one = decompose_fock(1, 1e-3).map_err(err)?;
    let poly = apply_creation_polynomial(&vac, 0, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)], 0.2).map_err(err)?;
    let f_poly = fidelity(&poly, &one).map_err(err)?;
    let post = apply_creation_postselect(&vac, 0, 0.01, 0.2).map_err(err)?;
    let f_post = fidelity(&post, &one).map_err(err)?;

    // a^dag |alpha> written out in the Fock basis; on the vacuum the
    // post-selected construction is exact, so convergence is measured here
    let alpha = C64::new(0.5, 0.0);
    let coh = CoherentSuperposition::coherent(CoherentLabel::new(vec![alpha]).map_err(err)?);
    let cutoff = 40;
    let mut target = vec![C64::new(0.0, 0.0); cutoff + 1];
    let mut amp = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..cutoff {
        target[n + 1] = amp * ((n + 1) as f64).sqrt();
        amp *= alpha / ((n + 1) as f64).sqrt();
    }
    let distance = |eps_bs: f64| -> Result<(f64, f64), String> {
        let out = apply_creation_postselect(&coh, 0, eps_bs, 1e-3).map_err(err)?;
        let mut cross = C64::new(0.0, 0.0);
        let mut norm_out = 0.0;
        for (n, t) in target.iter().enumerate() {
            let a = fock_amplitude(&out, &FockOutcome::new(vec![n])).map_err(err)?;
            cross += t.conj() * a;
            norm_out += a.norm_sqr();
        }
        let norm_t: f64 = target.iter().map(|t| t.norm_sqr()).sum();
        let f = cross.norm_sqr() / (norm_t * norm_out);
        Ok(((1.0 - f).max(0.0).sqrt(), 1.0 - f))
    };
    let (d2, i2) = distance(0.02)?;
    let (d1, i1) = distance(0.01)?;
    let ratio = d2 / d1;
    check(
        f_poly > 0.999 && f_post > 0.999 && (ratio - 4.0).abs() <= 2.0,
        format!(
            "polynomial F = {f_poly:.6}, post-selection F = {f_post:.6}, trace-distance ratio {ratio:.3} (1-F ratio {:.2})",
            i2 / i1
        ),
    )
}

fn sampler_correctness() -> Outcome {
    let u = haar_random_transfer(3, 9).map_err(err)?;
    let psi = apply_transfer(&decompose_fock_product(&[1, 1, 1], 0.2).map_err(err)?, &u).map_err(err)?;
    let dist = oracle_distribution(&ones(3), &u).map_err(err)?;
    let draws = 10_000usize;
    let cfg = SamplerConfig { seed: 2026, total_photons: Some(3), steps: 2000, ..Default::default() };

    let samples = conditional_samples(&psi, &cfg, NormMethod::Exact, draws).map_err(err)?;
    let mut counts: HashMap<FockOutcome, f64> = HashMap::new();
    for s in samples {
        *counts.entry(s).or_default() += 1.0;
    }
    // merge sparse bins so every expected count is at least 5
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pending = (0.0, 0.0);
    let mut sorted = dist.clone();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (out, p) in &sorted {
        pending.0 += counts.get(out).copied().unwrap_or(0.0);
        pending.1 += p * draws as f64;
        if pending.1 >= 5.0 {
            bins.push(pending);
            pending = (0.0, 0.0);
        }
    }
    if pending.1 > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += pending.0;
                last.1 += pending.1;
            }
            None => bins.push(pending),
        }
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = (bins.len() - 1) as f64;
    let critical = ChiSquared::new(df).map_err(err)?.inverse_cdf(0.99);

    let runs = metropolis_samples(&psi, &cfg, draws).map_err(err)?;
    let mut mcounts: HashMap<FockOutcome, f64> = HashMap::new();
    for r in runs {
        *mcounts.entry(r.outcome).or_default() += 1.0 / draws as f64;
    }
    let tvd: f64 = 0.5 * dist.iter().map(|(o, p)| (mcounts.get(o).copied().unwrap_or(0.0) - p).abs()).sum::<f64>();
    check(
        stat < critical && tvd < 0.05,
        format!("chi2 = {stat:.2} < {critical:.2} (df {df}), Metropolis TVD = {tvd:.4}"),
    )
}

fn time_reversal() -> Outcome {
    let u = haar_random_transfer(6, 6).map_err(err)?;
    let input = ones(6);
    let mut out = vec![0; 6];
    out[0] = 6;
    let output = FockOutcome::new(out);
    let auto = transition_amplitude(&input, &u, &output, 0.2).map_err(err)?;
    let fwd = transition_amplitude_directed(&input, &u, &output, 0.2, Direction::Forward).map_err(err)?;
    let bound = 10.0 * (auto.certified_error + fwd.certified_error);
    let diff = (auto.value - fwd.value).norm();
    let oracle = oracle_amplitude(&input, &u, &output).map_err(err)?;
    check(
        auto.direction == Direction::Reversed && auto.rank == 7 && fwd.rank == 64 && diff <= bound,
        format!(
            "direction {:?}, rank {} vs {}, |A_rev - A_fwd| = {diff:.1e} <= {bound:.1e}, oracle dev {:.1e}",
            auto.direction,
            auto.rank,
            fwd.rank,
            (auto.value - oracle).norm()
        ),
    )
}

fn time_transfer(k: usize, m: usize) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64((k * 131 + m) as u64);
    let amps: Vec<C64> = (0..k).map(|_| C64::new(rng.random(), rng.random())).collect();
    let labels: Vec<C64> = (0..k * m).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let psi = CoherentSuperposition::from_parts(m, amps, labels).map_err(err)?;
    let u = haar_random_transfer(m, 1).map_err(err)?;
    // size the batch to roughly 20 ms, then take the best of several batches
    let mut reps = 1usize;
    loop {
        let t = Instant::now();
        for _ in 0..reps {
            black_box(apply_transfer(black_box(&psi), &u).map_err(err)?);
        }
        if t.elapsed() > Duration::from_millis(20) {
            break;
        }
        reps *= 2;
    }
    let mut best = f64::INFINITY;
    for _ in 0..7 {
        let t = Instant::now();
        for _ in 0..reps {
            black_box(apply_transfer(black_box(&psi), &u).map_err(err)?);
        }
        best = best.min(t.elapsed().as_secs_f64() / reps as f64);
    }
    Ok(best)
}

fn complexity_scaling() -> Outcome {
    let ks: Vec<usize> = (4..=10).map(|e| 1 << e).collect();
    let m_fixed = 16;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &k in &ks {
        xs.push((k as f64).ln());
        ys.push(time_transfer(k, m_fixed)?.ln());
    }
    let k_slope = slope(&xs, &ys);
    let ms = [4usize, 8, 16, 32];
    let k_fixed = 1024;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &m in &ms {
        xs.push((m as f64).ln());
        ys.push(time_transfer(k_fixed, m)?.ln());
    }
    let m_slope = slope(&xs, &ys);
    check(
        (k_slope - 1.0).abs() <= 0.2 && (m_slope - 2.0).abs() <= 0.3,
        format!("apply_transfer slope in k {k_slope:.3} (m={m_fixed}), in m {m_slope:.3} (k={k_fixed})"),
    )
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 boson sampling vs oracle", boson_sampling),
        ("2 fidelity law", fidelity_law),
        ("3 Wigner negativity closed forms", wigner_closed_forms),
        ("4 Monte-Carlo norm estimation", norm_estimation),
        ("5 Hong-Ou-Mandel null", hong_ou_mandel),
        ("6 squeezed decomposition", squeezed),
        ("7 free-operation invariants", free_operations),
        ("8 creation-operator contract", creation_operator),
        ("9 sampler correctness", sampler_correctness),
        ("10 time-reversal speedup", time_reversal),
        ("11 complexity scaling", complexity_scaling),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{name}] {detail} ({:.2?})", start.elapsed());
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}

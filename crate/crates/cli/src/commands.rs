use std::io::Write;

use cohrank::fock_oracle::{evolve_fock_exact_with_cap, write_amplitude_csv};
use cohrank::measure::SampleRecord;
use cohrank::wigner::{wigner_grid, write_wigner_csv};
use cohrank::{
    apply_circuit, conditional_samples, estimate_norm_mc, fixed_photon_outcomes,
    fock_amplitude, fock_dimension, metropolis_samples, norm_squared, rank_monotone,
    select_radius, transition_amplitude, wigner_negativity, CircuitSummary, CoherentSuperposition,
    FockOutcome, InputSpec, ModeSpec, NegativityReport, NormMethod, PreparedInput, QuadratureGrid,
    SamplerConfig, WignerSource, C64,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::run::{
    StateFile, Cli, CliResult, Command, Failure, Method, COHERENT_PHOTON_CAP, EXIT_VALIDATION, ORACLE_PHOTON_CAP,
};

const MAX_TABLE_ROWS: u64 = 1_000_000;

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    match cli.command {
        Command::Amplitudes => amplitudes(cli),
        Command::Sample => sample(cli),
        Command::Norm => norm(cli),
        Command::Wigner => wigner(cli),
        Command::Resource => resource(cli),
        Command::OracleCheck => oracle_check(cli),
    }
}

struct Evolved {
    prepared: PreparedInput,
    summary: CircuitSummary,
    state: CoherentSuperposition,
}

impl Evolved {
    fn modes(&self) -> usize {
        self.state.modes()
    }

    /// Photon number, when both the input and the circuit fix it.
    fn conserved_photons(&self) -> Option<usize> {
        self.prepared.total_photons().filter(|_| self.summary.is_passive())
    }
}

fn prepare(cli: &Cli, file: StateFile) -> CliResult<PreparedInput> {
    Ok(match file {
        StateFile::Spec(spec) => spec.prepare(cli.epsilon)?,
        StateFile::Raw(state) => PreparedInput {
            state: cohrank::normalize(&state)?,
            fidelity: 1.0,
            epsilon: cli.epsilon.unwrap_or(cohrank::DEFAULT_EPSILON),
            fock: None,
        },
    })
}

fn evolve(cli: &Cli) -> CliResult<Evolved> {
    let prepared = prepare(cli, cli.load_state()?)?;
    let circuit = cli.load_circuit(prepared.state.modes())?;
    let summary = circuit.summary()?;
    let state = apply_circuit(&prepared.state, &summary)?;
    Ok(Evolved { prepared, summary, state })
}

fn header<W: Write + ?Sized>(w: &mut W, cli: &Cli, run: &Evolved) -> CliResult<()> {
    writeln!(w, "# runspec: {}", cli.runspec_json())?;
    writeln!(
        w,
        "# epsilon={} seed={} rank={} input_fidelity={:.12}",
        run.prepared.epsilon,
        cli.seed,
        run.state.rank(),
        run.prepared.fidelity
    )?;
    Ok(())
}

fn outcome_table(run: &Evolved, cutoff: Option<usize>) -> CliResult<Vec<FockOutcome>> {
    let m = run.modes();
    if let Some(n) = run.conserved_photons() {
        if n > COHERENT_PHOTON_CAP {
            return Err(Failure::resource(format!(
                "{n} photons exceed the cap of {COHERENT_PHOTON_CAP}"
            )));
        }
        return Ok(fixed_photon_outcomes(n, m));
    }
    let cutoff = cutoff.ok_or_else(|| {
        Failure::validation("photon number is not conserved for this input and circuit; pass --cutoff")
    })?;
    let mut rows: u64 = 0;
    for t in 0..=cutoff {
        rows = rows.saturating_add(fock_dimension(t, m)?);
    }
    if rows > MAX_TABLE_ROWS {
        return Err(Failure::resource(format!("{rows} outcomes exceed the table cap of {MAX_TABLE_ROWS}")));
    }
    Ok((0..=cutoff).flat_map(|t| fixed_photon_outcomes(t, m)).collect())
}

fn amplitudes(cli: &Cli) -> CliResult<()> {
    let run = evolve(cli)?;
    let outcomes = outcome_table(&run, cli.cutoff)?;
    let mut rows: Vec<(FockOutcome, C64)> = outcomes
        .into_par_iter()
        .map(|o| fock_amplitude(&run.state, &o).map(|a| (o, a)))
        .collect::<Result<_, _>>()?;
    rows.sort_by(|a, b| b.1.norm_sqr().total_cmp(&a.1.norm_sqr()));
    let mut w = cli.sink()?;
    header(&mut w, cli, &run)?;
    write_amplitude_csv(&mut w, &rows)?;
    w.flush()?;
    Ok(())
}

fn sampler_config(cli: &Cli, run: &Evolved) -> SamplerConfig {
    SamplerConfig {
        seed: cli.seed,
        steps: cli.steps,
        radius: cli.radius.unwrap_or(3.0),
        total_photons: run.conserved_photons(),
        cutoff: cli.cutoff,
    }
}

fn sample(cli: &Cli) -> CliResult<()> {
    let run = evolve(cli)?;
    let cfg = sampler_config(cli, &run);
    let method = cli.method.unwrap_or(Method::Conditional);
    let (name, outcomes): (&str, Vec<FockOutcome>) = match method {
        Method::Metropolis => (
            "metropolis",
            metropolis_samples(&run.state, &cfg, cli.draws)?
                .into_iter()
                .map(|r| r.outcome)
                .collect(),
        ),
        Method::Conditional | Method::Exact => {
            ("conditional", conditional_samples(&run.state, &cfg, NormMethod::Exact, cli.draws)?)
        }
        Method::Mc => ("conditional-mc", conditional_samples(&run.state, &cfg, NormMethod::MonteCarlo, cli.draws)?),
        Method::Orthogonal => (
            "conditional-orthogonal",
            conditional_samples(&run.state, &cfg, NormMethod::AssumeOrthogonal, cli.draws)?,
        ),
    };
    let mut w = cli.sink()?;
    writeln!(w, "{}", json!({ "runspec": cli, "input_fidelity": run.prepared.fidelity, "rank": run.state.rank() }))?;
    for outcome in outcomes {
        let record = SampleRecord { outcome: outcome.counts, seed: cli.seed, method: name.to_string() };
        writeln!(w, "{}", serde_json::to_string(&record).expect("record serializes"))?;
    }
    w.flush()?;
    Ok(())
}

fn norm(cli: &Cli) -> CliResult<()> {
    let run = evolve(cli)?;
    let exact = norm_squared(&run.state);
    let report = match cli.method.unwrap_or(Method::Exact) {
        Method::Exact => json!({ "runspec": cli, "method": "exact", "norm_squared": exact }),
        Method::Mc => {
            let mut cfg = sampler_config(cli, &run);
            let (radius, est) = match cli.radius {
                Some(r) => {
                    cfg.radius = r;
                    (r, estimate_norm_mc(&run.state, &cfg)?)
                }
                None => select_radius(&run.state, &cfg)?,
            };
            json!({
                "runspec": cli,
                "method": "monte-carlo",
                "radius": radius,
                "estimate": est.estimate,
                "stderr": est.stderr,
                "exact": exact,
            })
        }
        other => {
            return Err(Failure::validation(format!("norm supports --method exact or mc, got {other:?}")));
        }
    };
    let mut w = cli.sink()?;
    writeln!(w, "{}", serde_json::to_string_pretty(&report).expect("report serializes"))?;
    w.flush()?;
    Ok(())
}

fn wigner(cli: &Cli) -> CliResult<()> {
    let run = evolve(cli)?;
    if run.modes() != 1 {
        return Err(Failure::validation(format!("wigner needs a single-mode state, got {} modes", run.modes())));
    }
    let rows = wigner_grid(&run.state, cli.radius.unwrap_or(4.0), cli.points)?;
    let mut w = cli.sink()?;
    header(&mut w, cli, &run)?;
    write_wigner_csv(&mut w, &rows)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ModeResource {
    mode: usize,
    spec: ModeSpec,
    rank: usize,
    rank_monotone: f64,
    wigner: NegativityReport,
    /// `W / R`, when `R > 0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio: Option<f64>,
}

fn resource(cli: &Cli) -> CliResult<()> {
    let file = cli.load_state()?;
    let spec = match &file {
        StateFile::Spec(spec) => Some(spec.clone()),
        StateFile::Raw(_) => None,
    };
    let prepared = prepare(cli, file)?;
    let eps = prepared.epsilon;
    let grid = QuadratureGrid::default();
    let modes: Vec<ModeResource> = spec
        .iter()
        .flat_map(|s| s.modes.iter())
        .enumerate()
        .map(|(mode, m)| -> CliResult<ModeResource> {
            let single = InputSpec { epsilon: Some(eps), modes: vec![m.clone()] }.prepare(None)?.state;
            let wigner = match m {
                ModeSpec::Fock(n) => wigner_negativity(&WignerSource::Fock(*n), &grid)?,
                _ => wigner_negativity(&WignerSource::Superposition(&single), &grid)?,
            };
            let r = rank_monotone(&single);
            Ok(ModeResource {
                mode,
                spec: m.clone(),
                rank: single.rank(),
                rank_monotone: r,
                wigner,
                ratio: (r > 0.0).then(|| wigner.log2 / r),
            })
        })
        .collect::<CliResult<_>>()?;
    // an explicit single-mode state gets its own negativity
    let state_wigner = if spec.is_none() && prepared.state.modes() == 1 {
        Some(wigner_negativity(&WignerSource::Superposition(&prepared.state), &grid)?)
    } else {
        None
    };
    let report = json!({
        "runspec": cli,
        "epsilon": eps,
        "total_rank": prepared.state.rank(),
        "total_rank_monotone": rank_monotone(&prepared.state),
        "wigner": state_wigner,
        "modes": modes,
    });
    let mut w = cli.sink()?;
    writeln!(w, "{}", serde_json::to_string_pretty(&report).expect("report serializes"))?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Deviation {
    outcome: FockOutcome,
    coherent: [f64; 2],
    oracle: [f64; 2],
    deviation: f64,
    bound: f64,
}

fn oracle_check(cli: &Cli) -> CliResult<()> {
    let spec = cli.load_spec()?;
    let input = spec
        .fock_counts()
        .ok_or_else(|| Failure::validation("oracle-check needs an all-Fock input state"))?;
    let circuit = cli.load_circuit(spec.modes())?;
    let summary = circuit.summary()?;
    if !summary.is_passive() {
        return Err(Failure::validation("oracle-check needs a passive circuit (no displacements)"));
    }
    let n = input.total();
    if n > ORACLE_PHOTON_CAP {
        return Err(Failure::resource(format!("{n} photons exceed the oracle cap of {ORACLE_PHOTON_CAP}")));
    }
    let eps = cli.epsilon.or(spec.epsilon).unwrap_or(cohrank::DEFAULT_EPSILON);
    let exact = evolve_fock_exact_with_cap(&input, &summary.transfer, ORACLE_PHOTON_CAP)?;
    let outcomes = fixed_photon_outcomes(n, spec.modes());
    let rows: Vec<Deviation> = outcomes
        .into_par_iter()
        .map(|o| -> CliResult<Deviation> {
            let t = transition_amplitude(&input, &summary.transfer, &o, eps)?;
            let value = t.value;
            let oracle = exact.amplitude(&o);
            Ok(Deviation {
                deviation: (value - oracle).norm(),
                bound: t.certified_error.max(1e-12),
                coherent: [value.re, value.im],
                oracle: [oracle.re, oracle.im],
                outcome: o,
            })
        })
        .collect::<CliResult<_>>()?;
    // the normalized pipeline, for the decomposition-error figure in the report
    let prepared = spec.prepare(Some(eps))?;
    let evolved = apply_circuit(&prepared.state, &summary)?;
    let mut max_prob_dev: f64 = 0.0;
    for row in &rows {
        let p = fock_amplitude(&evolved, &row.outcome)?.norm_sqr();
        let q = row.oracle[0].powi(2) + row.oracle[1].powi(2);
        max_prob_dev = max_prob_dev.max((p - q).abs());
    }
    let failures: Vec<&Deviation> = rows.iter().filter(|r| r.deviation > r.bound).collect();
    let pass = failures.is_empty();
    let report = json!({
        "runspec": cli,
        "photons": n,
        "outcomes": rows.len(),
        "max_deviation": rows.iter().map(|r| r.deviation).fold(0.0, f64::max),
        "max_bound": rows.iter().map(|r| r.bound).fold(0.0, f64::max),
        "normalized_pipeline_max_probability_deviation": max_prob_dev,
        "input_fidelity": prepared.fidelity,
        "pass": pass,
        "failures": failures,
    });
    let mut w = cli.sink()?;
    writeln!(w, "{}", serde_json::to_string_pretty(&report).expect("report serializes"))?;
    w.flush()?;
    if pass {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VALIDATION,
            message: format!("{} amplitudes exceed their certified bound", failures.len()),
        })
    }
}

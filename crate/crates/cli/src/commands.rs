use std::io::Write;

use relkit_core::bayes::{missing_value_intervals, run_gibbs, GibbsConfig};
use relkit_core::exec::with_thread_count;
use relkit_core::field::FieldEnsemble;
use relkit_core::form::solve_form;
use relkit_core::mcs::{crude_mcs_with, McsOptions};
use relkit_core::subset::{run_subset, run_subset_batch, SubsetResult, SubsetStatus};
use relkit_core::Execution;

use crate::config::{field_inputs, prior_spec, ProblemConfig};
use crate::data::read_data_csv;
use crate::error::CliError;
use crate::format;
use crate::output::{full, header, numbered, Outputs, Summary};

pub struct Context<'a> {
    pub config: ProblemConfig,
    pub outputs: Outputs,
    pub threads: usize,
    pub quiet: bool,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

impl Context<'_> {
    fn report(&mut self, headline: &str, summary: &Summary) -> Result<(), CliError> {
        self.outputs.summary(summary)?;
        if !self.quiet {
            writeln!(self.stdout, "{headline}")?;
            for (k, v) in summary.entries() {
                writeln!(self.stdout, "  {k} = {v}")?;
            }
        }
        Ok(())
    }

    fn warn(&mut self, msg: &str) -> Result<(), CliError> {
        writeln!(self.stderr, "warning: {msg}")?;
        Ok(())
    }
}

pub fn form(ctx: &mut Context) -> Result<(), CliError> {
    let problem = ctx.config.reliability_problem()?;
    let section = ctx.config.form.clone().unwrap_or_default();
    let options = ctx.config.form_options(&section)?;
    let r = solve_form(&problem, &options)?;
    let n = problem.dim();

    let mut s = Summary::default();
    s.num("beta", r.beta);
    s.num("pf", r.pf);
    s.int("iterations", r.iterations);
    s.int("converged", r.converged);
    for (name, v) in [("x_star", &r.x_star), ("u_star", &r.u_star), ("alpha", &r.alpha)] {
        for (i, x) in v.iter().enumerate() {
            s.num(format!("{name}_{}", i + 1), *x);
        }
    }
    let mut cols = vec!["iteration".to_string()];
    cols.extend(numbered("x", n));
    cols.extend(numbered("u", n));
    cols.extend(["g".to_string(), "beta".to_string()]);
    let rows = r.history.iter().enumerate().map(|(k, it)| {
        let mut row = vec![k.to_string()];
        row.extend(it.x.iter().chain(&it.u).map(|v| full(*v)));
        row.extend([full(it.g), full(it.beta_new)]);
        row
    });
    ctx.outputs.csv("trace", &cols, rows)?;
    let headline = format!(
        "form: beta={} pf={} iterations={} converged={}",
        format::fixed(r.beta, 2),
        format::exp(r.pf, 2),
        r.iterations,
        r.converged
    );
    ctx.report(&headline, &s)?;
    if !r.converged {
        return Err(CliError::Numeric(format!("FORM did not converge in {} iterations", options.max_iter)));
    }
    Ok(())
}

pub fn subset(ctx: &mut Context) -> Result<(), CliError> {
    let problem = ctx.config.reliability_problem()?;
    let section = ctx.config.subset.clone().unwrap_or_default();
    let cfg = ctx.config.subset_config(&section)?;
    let runs = section.runs.unwrap_or(1);
    let n = problem.dim();

    if runs > 1 {
        let results = with_thread_count(ctx.threads, || run_subset_batch(&problem, &cfg, runs, Execution::Parallel));
        let results: Vec<SubsetResult> = results.into_iter().collect::<Result<_, _>>()?;
        let mut pf: Vec<f64> = results.iter().map(|r| r.pf).collect();
        let rows = results.iter().enumerate().map(|(k, r)| {
            vec![
                k.to_string(),
                cfg.seed.wrapping_add(k as u64).to_string(),
                full(r.pf),
                r.levels_used.to_string(),
                status_name(r.status).to_string(),
            ]
        });
        ctx.outputs.csv("runs", &header(&["run", "seed", "pf", "levels_used", "status"]), rows)?;
        pf.sort_by(f64::total_cmp);
        let median = if runs % 2 == 1 { pf[runs / 2] } else { 0.5 * (pf[runs / 2 - 1] + pf[runs / 2]) };
        let mean = pf.iter().sum::<f64>() / runs as f64;
        let sd = (pf.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (runs as f64 - 1.0)).sqrt();
        let truncated = results.iter().filter(|r| r.status == SubsetStatus::Truncated).count();
        let mut s = Summary::default();
        s.int("runs", runs);
        s.num("pf_median", median);
        s.num("pf_mean", mean);
        s.num("pf_cov", sd / mean);
        s.int("truncated_runs", truncated);
        if truncated > 0 {
            ctx.warn(&format!(
                "subset: {truncated} of {runs} runs reached max_levels; their pf is the upper bound p0^max_levels"
            ))?;
        }
        let headline =
            format!("subset: runs={runs} pf_median={} pf_cov={}", format::exp(median, 2), format::fixed(sd / mean, 3));
        return ctx.report(&headline, &s);
    }

    let r = run_subset(&problem, &cfg)?;
    let mut s = Summary::default();
    s.num("pf", r.pf);
    s.int("levels_used", r.levels_used);
    s.text("status", status_name(r.status));
    s.int("n_samples", cfg.n_samples);
    s.num("p0", cfg.p0);
    for (i, t) in r.thresholds.iter().enumerate() {
        s.num(format!("threshold_{}", i + 1), *t);
    }
    let levels = (0..r.levels_used).map(|i| {
        vec![
            (i + 1).to_string(),
            full(r.thresholds[i]),
            full(r.conditional_probs[i]),
            r.acceptance_rate_per_level.get(i).map(|a| full(*a)).unwrap_or_default(),
        ]
    });
    ctx.outputs.csv("levels", &header(&["level", "threshold", "conditional_prob", "acceptance_rate"]), levels)?;
    let mut cols = vec!["level".to_string()];
    cols.extend(numbered("x", n));
    cols.push("g".into());
    let sets =
        if r.level_samples.is_empty() { std::slice::from_ref(&r.final_level_samples) } else { &r.level_samples[..] };
    let rows = sets.iter().flat_map(|lv| {
        (0..lv.len()).map(move |i| {
            let mut row = vec![lv.level.to_string()];
            row.extend(lv.point(i).iter().map(|v| full(*v)));
            row.push(full(lv.g[i]));
            row
        })
    });
    ctx.outputs.csv("samples", &cols, rows)?;
    if r.status == SubsetStatus::Truncated {
        ctx.warn(&format!(
            "subset: max_levels ({}) reached before the threshold hit 0; pf is the upper bound p0^max_levels",
            cfg.max_levels
        ))?;
    }
    let headline =
        format!("subset: pf={} levels={} status={}", format::exp(r.pf, 2), r.levels_used, status_name(r.status));
    ctx.report(&headline, &s)
}

fn status_name(s: SubsetStatus) -> &'static str {
    match s {
        SubsetStatus::Converged => "converged",
        SubsetStatus::Truncated => "truncated",
    }
}

pub fn mcs(ctx: &mut Context) -> Result<(), CliError> {
    let problem = ctx.config.reliability_problem()?;
    let section = ctx.config.mcs.clone().ok_or_else(|| CliError::Config("/mcs: missing section".into()))?;
    let mut opts = McsOptions { execution: Execution::Parallel, ..McsOptions::default() };
    if let Some(b) = section.block_size {
        opts.block_size = b;
    }
    let seed = ctx.config.seed;
    let r = with_thread_count(ctx.threads, || crude_mcs_with(&problem, section.n_samples, seed, &opts))?;
    let mut s = Summary::default();
    s.num("pf_hat", r.pf_hat);
    s.int("n_samples", r.n_samples);
    s.int("n_failures", r.n_failures);
    s.num("std_error", r.std_error);
    s.num("ci95_lower", r.ci95.0);
    s.num("ci95_upper", r.ci95.1);
    match r.beta_hat {
        Some(b) => s.num("beta_hat", b),
        None => s.text("beta_hat", "undefined"),
    }
    let beta = r.beta_hat.map_or("undefined".to_string(), |b| format::fixed(b, 2));
    let headline =
        format!("mcs: pf={} beta={beta} n={} failures={}", format::exp(r.pf_hat, 2), r.n_samples, r.n_failures);
    ctx.report(&headline, &s)
}

pub fn field(ctx: &mut Context) -> Result<(), CliError> {
    let section = ctx.config.field.clone().ok_or_else(|| CliError::Config("/field: missing section".into()))?;
    let (grid, lengths, method, realizations) = field_inputs(&section)?;
    let ensemble = FieldEnsemble::new(grid, lengths, method, ctx.config.seed)?;
    let first = ensemble.realization(0);

    let mut s = Summary::default();
    s.int("nx", grid.nx);
    s.int("ny", grid.ny);
    s.int("realizations", realizations);
    s.num("field_mean", first.mean());
    s.num("field_std", first.std_dev());

    let mut rows = vec![
        header(&["ny", "nx", "Lx", "Ly"]),
        vec![grid.ny.to_string(), grid.nx.to_string(), full(grid.domain_x), full(grid.domain_y)],
    ];
    rows.extend(first.values.row_iter().map(|r| r.iter().map(|v| full(*v)).collect()));
    ctx.outputs.csv_ragged("field", rows)?;

    let mut headline = format!("field: nx={} ny={} realizations={realizations}", grid.nx, grid.ny);
    if realizations >= 2 {
        let threads = ctx.threads;
        let st = with_thread_count(threads, || ensemble.stats(realizations, section.max_lag, Execution::Parallel))?;
        s.num("max_abs_pointwise_mean", st.pointwise_mean.amax());
        s.num("mean_pointwise_std", st.pointwise_std.mean());
        for (axis, fit, target) in [("x", st.fit_x, lengths.lx), ("y", st.fit_y, lengths.ly)] {
            match fit {
                Some(f) => {
                    s.num(format!("l{axis}_hat"), f.length);
                    s.int(format!("l{axis}_lags_used"), f.lags_used);
                    headline.push_str(&format!(" l{axis}_hat={}", format::fixed(f.length, 2)));
                }
                None => s.text(format!("l{axis}_hat"), "undefined"),
            }
            s.num(format!("l{axis}"), target);
        }
        for (suffix, corr, d, l) in
            [("corr_x", &st.corr_x, st.dx, lengths.lx), ("corr_y", &st.corr_y, st.dy, lengths.ly)]
        {
            let rows = corr.iter().enumerate().map(|(k, r)| {
                let tau = k as f64 * d;
                vec![full(tau), full(*r), full((-tau / l).exp())]
            });
            ctx.outputs.csv(suffix, &header(&["lag", "rho_hat", "rho_theory"]), rows)?;
        }
    }
    ctx.report(&headline, &s)
}

pub fn gibbs(ctx: &mut Context) -> Result<(), CliError> {
    let section = ctx.config.gibbs.clone().ok_or_else(|| CliError::Config("/gibbs: missing section".into()))?;
    let (names, data) = read_data_csv(&section.data)?;
    let n = data.ncols();
    let prior = prior_spec(&section.prior, n)?;
    let cfg = GibbsConfig { num_iterations: section.num_iterations, burn_in: section.burn_in, seed: ctx.config.seed };
    let post = run_gibbs(&data, &prior, &cfg)?;
    let level = section.level.unwrap_or(0.95);

    let mut s = Summary::default();
    s.int("rows", data.nrows());
    s.int("columns", n);
    s.int("missing_cells", data.missing_count());
    s.int("retained_draws", post.len());
    let mean = post.posterior_mean();
    let sd = post.posterior_sd();
    for j in 0..n {
        s.num(format!("mu_mean_{}", names[j]), mean[j]);
        s.num(format!("mu_sd_{}", names[j]), sd[j]);
    }

    let mut cols = vec!["iteration".to_string()];
    cols.extend(numbered("mu_", n));
    let rows = post.iterations.iter().enumerate().map(|(t, it)| {
        let mut row = vec![it.to_string()];
        row.extend(post.mu_samples.row(t).iter().map(|v| full(*v)));
        row
    });
    ctx.outputs.csv("trace", &cols, rows)?;

    let mut cols = vec!["iteration".to_string()];
    for i in 1..=n {
        for j in 1..=n {
            cols.push(format!("sigma_{i}_{j}"));
        }
    }
    let rows = post.iterations.iter().zip(&post.sigma_samples).map(|(it, sig)| {
        let mut row = vec![it.to_string()];
        row.extend(sig.transpose().iter().map(|v| full(*v)));
        row
    });
    ctx.outputs.csv("sigma", &cols, rows)?;

    if data.missing_count() > 0 {
        let iv = missing_value_intervals(&post, level)?;
        let rows = iv.iter().map(|c| {
            vec![(c.row + 1).to_string(), (c.column + 1).to_string(), full(c.lower), full(c.median), full(c.upper)]
        });
        ctx.outputs.csv("intervals", &header(&["row", "column", "lower", "median", "upper"]), rows)?;
        let width = iv.iter().map(|c| c.upper - c.lower).sum::<f64>() / iv.len() as f64;
        s.num("level", level);
        s.num("mean_interval_width", width);
    }
    let mu: Vec<String> = mean.iter().map(|v| format::sig(*v, 4)).collect();
    let headline = format!("gibbs: retained={} missing={} mu=[{}]", post.len(), data.missing_count(), mu.join(", "));
    ctx.report(&headline, &s)
}

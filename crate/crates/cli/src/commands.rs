use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use gmmot::io::{
    coords_trace_doc, load_csv, load_gmm, load_run_config, make_toy, save_csv, save_gmm, write_json, DictionaryDoc,
    PlanDoc, RunConfig,
};
use gmmot::ot::supervised_transport;
use gmmot::{Dataset, EmConfig, Gmm};
use ndarray::Array1;
use serde_json::json;

use crate::args::{self, Cli, Command};
use crate::manifest::{self, Manifest};

pub fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .context("configuring the thread pool")?;
    let cfg = match &cli.config {
        Some(path) => load_run_config(path).with_context(|| format!("reading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::FitGmm(a) => fit_gmm(a, cfg),
        Command::Gmmot(a) => transport(a),
        Command::Mw2(a) => mw2(a),
        Command::Barycenter(a) => barycenter(a, cfg),
        Command::Wbt(a) => wbt(a, cfg),
        Command::Dadil(a) => dadil(a, cfg),
        Command::Classify(a) => classify(a, cfg),
        Command::ToyGen(a) => toy_gen(a, cfg),
    }
}

fn read_data(path: &Path) -> Result<Dataset> {
    load_csv(path).with_context(|| format!("reading {}", path.display()))
}

fn read_gmm(path: &Path) -> Result<Gmm> {
    load_gmm(path).with_context(|| format!("reading {}", path.display()))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write(value: &impl serde::Serialize, path: &Path, manifest: &mut Manifest) -> Result<()> {
    write_json(value, path).with_context(|| format!("writing {}", path.display()))?;
    manifest.output(path);
    Ok(())
}

fn apply_em(em: &mut EmConfig, k: Option<usize>, seed: Option<u64>, s_min: Option<f64>) {
    if let Some(k) = k {
        em.n_components = k;
    }
    if let Some(seed) = seed {
        em.seed = seed;
    }
    if let Some(s) = s_min {
        em.s_min = s;
    }
}

fn fit_gmm(a: args::FitGmm, mut cfg: RunConfig) -> Result<()> {
    let em = &mut cfg.em;
    apply_em(em, a.k, a.seed.seed, a.s_min);
    if let Some(t) = a.tol {
        em.tol = t;
    }
    if let Some(n) = a.iters {
        em.max_iter = n;
    }
    let data = read_data(&a.data)?;
    let g = match a.k_per_class {
        Some(k) => gmmot::fit_labeled(&data, k, em),
        None => gmmot::em_fit(data.features(), em),
    }
    .context("fitting the mixture")?;
    let resolved = json!({ "data": a.data, "em": em, "k_per_class": a.k_per_class });
    let mut m = Manifest::new("fit-gmm", resolved, em.seed);
    save_gmm(&g, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    m.output(&a.out);
    m.write(&manifest::beside(&a.out))
}

fn pair(a: &args::Pair) -> Result<(Gmm, Gmm)> {
    ensure!(a.beta >= 0.0 && a.beta.is_finite(), "--beta must be a nonnegative number");
    Ok((read_gmm(&a.a)?, read_gmm(&a.b)?))
}

fn transport(a: args::Pair) -> Result<()> {
    let (p, q) = pair(&a)?;
    let (plan, obj) = supervised_transport(&p, &q, a.beta).context("solving the transport problem")?;
    println!("{obj:?}");
    if let Some(out) = &a.out {
        let resolved = json!({ "a": a.a, "b": a.b, "beta": a.beta });
        let mut m = Manifest::new("gmmot", resolved, 0);
        write(&PlanDoc::new(&plan, obj), out, &mut m)?;
        m.write(&manifest::beside(out))?;
    }
    Ok(())
}

fn mw2(a: args::Pair) -> Result<()> {
    let (p, q) = pair(&a)?;
    let squared = if a.beta > 0.0 { gmmot::smw2_sq(&p, &q, a.beta) } else { gmmot::mw2_sq(&p, &q) }
        .context("computing the distance")?;
    let distance = squared.max(0.0).sqrt();
    println!("{distance:?}");
    if let Some(out) = &a.out {
        let resolved = json!({ "a": a.a, "b": a.b, "beta": a.beta });
        let mut m = Manifest::new("mw2", resolved, 0);
        write(&json!({ "distance": distance, "squared": squared, "beta": a.beta }), out, &mut m)?;
        m.write(&manifest::beside(out))?;
    }
    Ok(())
}

fn barycenter(a: args::Barycenter, mut cfg: RunConfig) -> Result<()> {
    let b = &mut cfg.barycenter;
    if let Some(k) = a.k {
        b.k_b = k;
    }
    if let Some(v) = a.beta {
        b.beta = v;
    }
    if let Some(v) = a.tol {
        b.tol = v;
    }
    if let Some(v) = a.iters {
        b.max_iter = v;
    }
    if let Some(v) = a.s_min {
        b.s_min = v;
    }
    if let Some(v) = a.seed.seed {
        b.seed = v;
    }
    let measures: Vec<Gmm> = a.sources.iter().map(|p| read_gmm(p)).collect::<Result<_>>()?;
    let n = measures.len();
    let lambda = match &a.weights {
        Some(w) => {
            ensure!(w.len() == n, "--weights has {} entries for {n} sources", w.len());
            Array1::from(w.clone())
        }
        None => Array1::from_elem(n, 1.0 / n as f64),
    };
    let (bary, trace) = if a.unsupervised {
        gmmot::mw_barycenter(&measures, lambda.view(), b)
    } else {
        gmmot::smw_barycenter(&measures, lambda.view(), b)
    }
    .context("computing the barycenter")?;

    create_dir(&a.out)?;
    let resolved = json!({
        "sources": a.sources,
        "weights": lambda.to_vec(),
        "barycenter": b,
        "unsupervised": a.unsupervised,
    });
    let mut m = Manifest::new("barycenter", resolved, b.seed);
    write(&gmmot::io::GmmDoc::from_gmm(&bary), &a.out.join("barycenter.json"), &mut m)?;
    write(&trace, &a.out.join("loss_trace.json"), &mut m)?;
    m.write(&manifest::in_dir(&a.out))
}

/// Source mixtures and the target mixture, plus the target samples when the
/// target came from a labeled CSV (used to report accuracy).
struct Domains {
    sources: Vec<Gmm>,
    target: Gmm,
    target_data: Option<Dataset>,
}

fn load_domains(sources: &[PathBuf], target: &Path, k_per_class: usize, em: &EmConfig) -> Result<Domains> {
    ensure!(k_per_class > 0, "--k-per-class must be positive");
    let sources = sources
        .iter()
        .map(|p| {
            if is_json(p) {
                return read_gmm(p);
            }
            let data = read_data(p)?;
            if data.labels().is_none() {
                bail!("source {} has no labels", p.display());
            }
            gmmot::fit_labeled(&data, k_per_class, em).with_context(|| format!("fitting source {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (target, target_data) = if is_json(target) {
        (read_gmm(target)?.without_labels(), None)
    } else {
        let data = read_data(target)?;
        let g = gmmot::em_fit(data.features(), em).context("fitting the target")?;
        (g, data.labels().is_some().then_some(data))
    };
    Ok(Domains { sources, target, target_data })
}

/// Target accuracy when labeled target samples are available; printed and
/// written to `metrics.json`.
fn report_accuracy(d: &Domains, adapted: &Gmm, out: &Path, m: &mut Manifest) -> Result<()> {
    let Some(data) = &d.target_data else {
        return Ok(());
    };
    let pred = adapted.predict(data.features()).context("classifying the target samples")?;
    let acc = data.accuracy(&pred)?;
    println!("target accuracy: {acc:.4}");
    write(&json!({ "target_accuracy": acc, "n_samples": data.len() }), &out.join("metrics.json"), m)
}

fn wbt(a: args::Adapt, mut cfg: RunConfig) -> Result<()> {
    apply_em(&mut cfg.em, a.k, a.seed.seed, a.s_min);
    let b = &mut cfg.barycenter;
    if let Some(k) = a.k {
        b.k_b = k;
    }
    if let Some(v) = a.beta {
        b.beta = v;
    }
    if let Some(v) = a.tol {
        b.tol = v;
    }
    if let Some(v) = a.iters {
        b.max_iter = v;
    }
    if let Some(v) = a.s_min {
        b.s_min = v;
    }
    if let Some(v) = a.seed.seed {
        b.seed = v;
    }
    let d = load_domains(&a.sources, &a.target, a.k_per_class, &cfg.em)?;
    let res = gmmot::gmm_wbt(&d.sources, &d.target, b).context("barycenter transport")?;

    create_dir(&a.out)?;
    let resolved = json!({
        "sources": a.sources,
        "target": a.target,
        "k_per_class": a.k_per_class,
        "em": cfg.em,
        "barycenter": b,
    });
    let mut m = Manifest::new("wbt", resolved, b.seed);
    write(&gmmot::io::GmmDoc::from_gmm(&res.target_gmm), &a.out.join("target_gmm.json"), &mut m)?;
    write(&res.loss_trace, &a.out.join("loss_trace.json"), &mut m)?;
    report_accuracy(&d, &res.target_gmm, &a.out, &mut m)?;
    m.write(&manifest::in_dir(&a.out))
}

fn dadil(a: args::Dadil, mut cfg: RunConfig) -> Result<()> {
    apply_em(&mut cfg.em, a.k, a.seed.seed, a.s_min);
    let dc = &mut cfg.dadil;
    if let Some(v) = a.atoms {
        dc.n_atoms = Some(v);
    }
    if let Some(v) = a.eta {
        dc.eta = v;
    }
    if let Some(v) = a.iters {
        dc.n_iter = v;
    }
    if let Some(v) = a.beta {
        dc.beta = v;
    }
    if let Some(v) = a.tol {
        dc.inner_tol = v;
    }
    if let Some(v) = a.s_min {
        dc.s_min = v;
    }
    if let Some(v) = a.seed.seed {
        dc.seed = v;
    }
    let d = load_domains(&a.sources, &a.target, a.k_per_class, &cfg.em)?;
    let (dict, res) = gmmot::dadil_fit(&d.sources, &d.target, dc).context("dictionary learning")?;

    create_dir(&a.out)?;
    let resolved = json!({
        "sources": a.sources,
        "target": a.target,
        "k_per_class": a.k_per_class,
        "em": cfg.em,
        "dadil": dc,
    });
    let mut m = Manifest::new("dadil", resolved, dc.seed);
    write(&DictionaryDoc::from_dictionary(&dict), &a.out.join("dictionary.json"), &mut m)?;
    write(&res.loss_trace, &a.out.join("loss_trace.json"), &mut m)?;
    if let Some(trace) = &res.coords_trace {
        write(&coords_trace_doc(trace), &a.out.join("coords_trace.json"), &mut m)?;
    }
    write(&gmmot::io::GmmDoc::from_gmm(&res.target_gmm), &a.out.join("target_gmm.json"), &mut m)?;
    report_accuracy(&d, &res.target_gmm, &a.out, &mut m)?;
    m.write(&manifest::in_dir(&a.out))
}

fn classify(a: args::Classify, cfg: RunConfig) -> Result<()> {
    let g = read_gmm(&a.gmm)?;
    ensure!(g.is_labeled(), "{} is not a labeled mixture", a.gmm.display());
    let seed = a.seed.seed.unwrap_or(cfg.em.seed);
    let (out_data, mode) = match (&a.data, a.sample) {
        (Some(path), _) => {
            let data = read_data(path)?;
            let pred = g.predict(data.features()).context("classifying")?;
            if data.labels().is_some() {
                println!("accuracy: {:.4}", data.accuracy(&pred)?);
            }
            (Dataset::labeled(data.features().to_owned(), pred)?, "map")
        }
        (None, Some(n)) => (g.sample_dataset(n, seed).context("sampling")?, "sample"),
        (None, None) => unreachable!("clap requires --data or --sample"),
    };
    let resolved = json!({ "gmm": a.gmm, "mode": mode, "data": a.data, "sample": a.sample });
    let mut m = Manifest::new("classify", resolved, seed);
    save_csv(&out_data, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    m.output(&a.out);
    m.write(&manifest::beside(&a.out))
}

fn toy_gen(a: args::ToyGen, mut cfg: RunConfig) -> Result<()> {
    if let Some(s) = a.seed.seed {
        cfg.toy.seed = s;
    }
    let domains = make_toy(&cfg.toy).context("generating toy domains")?;
    create_dir(&a.out)?;
    let mut m = Manifest::new("toy-gen", json!({ "toy": cfg.toy }), cfg.toy.seed);
    for (l, data) in domains.iter().enumerate() {
        let path = a.out.join(format!("domain{l}.csv"));
        save_csv(data, &path).with_context(|| format!("writing {}", path.display()))?;
        m.output(&path);
    }
    m.write(&manifest::in_dir(&a.out))
}

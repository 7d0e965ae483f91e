//! Subcommand implementations. Each reads its inputs from files, writes its
//! outputs to files and prints a short summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use scatnet::classifier::{cross_validate, intra_outer_curves, variance_decay, CvOutcome};
use scatnet::data::{
    hex, load_features, load_idx, load_model, load_texture_dir, manifest_of, save_texture_png, save_features, save_model,
    subsample_train, synthetic_textures, white_noise_textures, CsvTable, FeatureSet, LabeledDataset, Manifest,
    SampleSize, TextureBenchmark,
};
use scatnet::{Error, FilterBank, RealGrid, Result, ScatteringConfig, ScatteringTransform, TrainedClassifier};

use crate::config::{BetaChoice, RunConfig};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        context: path.display().to_string(),
        source,
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

/// Where the images of a run come from.
#[derive(Debug, Clone, Default, Args)]
pub struct DatasetArgs {
    /// IDX image archive (with --labels).
    #[arg(long, requires = "labels")]
    pub images: Option<PathBuf>,
    /// IDX label archive (with --images).
    #[arg(long, requires = "images")]
    pub labels: Option<PathBuf>,
    /// Directory with one subdirectory of grayscale images per class.
    #[arg(long = "texture-dir", conflicts_with = "images")]
    pub texture_dir: Option<PathBuf>,
    /// Generate this many synthetic textures per class instead of loading.
    #[arg(long = "synthetic-per-class", conflicts_with_all = ["images", "texture_dir"])]
    pub synthetic_per_class: Option<usize>,
    /// Side of the synthetic textures.
    #[arg(long = "synthetic-size", default_value_t = 128)]
    pub synthetic_size: usize,
    /// Offset added to the run seed when generating synthetic textures, so
    /// train and test sets can be drawn independently.
    #[arg(long = "synthetic-stream", default_value_t = 0)]
    pub synthetic_stream: u64,
    /// Keep a stratified random subset of this many samples.
    #[arg(long = "train-size")]
    pub train_size: Option<usize>,
}

impl DatasetArgs {
    pub fn load(&self, cfg: &RunConfig) -> Result<LabeledDataset> {
        let ds = match (&self.images, &self.labels, &self.texture_dir, self.synthetic_per_class) {
            (Some(i), Some(l), None, None) => load_idx(i, l)?,
            (None, None, Some(dir), None) => load_texture_dir(dir)?,
            (None, None, None, Some(per_class)) => synthetic_textures(&TextureBenchmark {
                size: self.synthetic_size,
                per_class,
                seed: cfg.seed.wrapping_add(self.synthetic_stream),
            })?,
            _ => {
                return Err(Error::Config(
                    "give exactly one of --images/--labels, --texture-dir or --synthetic-per-class".into(),
                ))
            }
        };
        match self.train_size {
            Some(n) => subsample_train(&ds, SampleSize::Total(n), cfg.seed),
            None => Ok(ds),
        }
    }
}

/// Scatters every image of `ds` with one transform sized to its images.
pub fn scatter_dataset(ds: &LabeledDataset, config: ScatteringConfig) -> Result<FeatureSet> {
    let (h, w) = ds
        .image_shape()
        .ok_or_else(|| Error::InvalidInput("dataset is empty".into()))?;
    let transform = ScatteringTransform::new(config, h, w)?;
    let vectors = transform.scatter_batch(ds.images())?;
    FeatureSet::from_vectors(&vectors, ds.labels().to_vec(), ds.provenance().manifest)
}

pub fn filters(cfg: &RunConfig, size: usize, out: &Path) -> Result<()> {
    create_dir(out)?;
    let bank = FilterBank::new(cfg.scattering.gabor, size, size)?;
    let write_grid = |name: &str, g: &RealGrid| -> Result<()> {
        let bytes: Vec<u8> = g.data().iter().flat_map(|v| v.abs().to_le_bytes()).collect();
        let p = out.join(name);
        std::fs::write(&p, bytes).map_err(io_err(&p))
    };
    let mut manifest = String::from("# file rows cols kind scale orientation\n");
    for j in 0..bank.scales() {
        for g in 0..bank.n_orientations() {
            let name = format!("psi_j{j}_g{g}.f64");
            write_grid(&name, bank.psi(j, g, 0))?;
            let _ = writeln!(manifest, "{name} {size} {size} wavelet {j} {g}");
        }
    }
    write_grid("phi.f64", bank.phi(0))?;
    let _ = writeln!(manifest, "phi.f64 {size} {size} lowpass {} -", bank.scales());
    let p = out.join("manifest.txt");
    std::fs::write(&p, manifest).map_err(io_err(&p))?;

    let digest = manifest_of([("filters", cfg.describe().as_bytes())]);
    let lp = bank.littlewood_paley_grid(true);
    let mut table = CsvTable::new("littlewood-paley", digest, &["row", "col", "omega_y", "omega_x", "sum"]);
    for r in 0..size {
        for c in 0..size {
            table.push(vec![
                r.to_string(),
                c.to_string(),
                scatnet::filterbank::bin_frequency(r, size).to_string(),
                scatnet::filterbank::bin_frequency(c, size).to_string(),
                lp.get(r, c).to_string(),
            ])?;
        }
    }
    table.write(&out.join("littlewood_paley.csv"))?;
    let prof = bank.profile();
    println!(
        "{} wavelets + low-pass on {size}x{size}; Littlewood-Paley min {:.6} max {:.6} (delta {:.6})",
        bank.scales() * bank.n_orientations(),
        prof.min_sum,
        prof.max_sum,
        prof.delta()
    );
    Ok(())
}

pub fn scatter(cfg: &RunConfig, data: &DatasetArgs, out: &Path) -> Result<()> {
    let ds = data.load(cfg)?;
    let fs = scatter_dataset(&ds, cfg.scattering)?;
    save_features(out, &fs)?;
    println!(
        "{} images -> {} features each ({} paths), written to {}",
        fs.len(),
        fs.feature_len(),
        fs.index().entries().len(),
        out.display()
    );
    Ok(())
}

fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(Vec::as_slice).collect()
}

/// Fits on all of `fs`; an automatic β is first chosen on a held-out part.
pub fn fit(cfg: &RunConfig, fs: &FeatureSet) -> Result<(TrainedClassifier, Option<CvOutcome>)> {
    let vectors = fs.vectors();
    let scales = fs.config().scales();
    let (beta, cv) = match cfg.beta {
        BetaChoice::Fixed(b) => (b, None),
        BetaChoice::Auto => {
            let out = cross_validate(fs.labels(), &[scales], |_| Ok(vectors.clone()), *fs.config(), &cfg.cross_validation())?;
            (out.beta, Some(out))
        }
    };
    let clf = TrainedClassifier::fit(*fs.config(), &refs(&vectors), fs.labels(), cfg.max_dim, beta)?;
    Ok((clf, cv))
}

pub fn train(cfg: &RunConfig, features: &Path, out: &Path) -> Result<()> {
    let fs = load_features(features)?;
    let (clf, cv) = fit(cfg, &fs)?;
    save_model(out, &clf, fs.manifest())?;
    if let Some(cv) = cv {
        println!("beta selected on held-out data: {} (validation error {:.2}%)", cv.beta, 100.0 * cv.error_rate);
    }
    let dims: Vec<String> = clf.models.iter().map(|m| m.dim().to_string()).collect();
    println!(
        "{} classes, D = {}, K = {}, beta = {}; model dimensions [{}]; written to {}",
        clf.models.len(),
        clf.feature_dim(),
        clf.max_dim,
        clf.beta,
        dims.join(", "),
        out.display()
    );
    Ok(())
}

fn cache_path(dir: &Path, ds: &LabeledDataset, config: &ScatteringConfig) -> PathBuf {
    let key = manifest_of([
        ("dataset", ds.provenance().manifest.as_slice()),
        ("config", format!("{config:?}").as_bytes()),
    ]);
    dir.join(format!("features_J{}_{}.sct", config.scales(), &hex(&key)[..16]))
}

/// Feature vectors for scale `J`, reusing a cached file when present.
fn features_for_scale(cfg: &RunConfig, ds: &LabeledDataset, scales: usize, cache: Option<&Path>) -> Result<Vec<Vec<f64>>> {
    let config = cfg.with_scales(scales);
    if let Some(dir) = cache {
        let p = cache_path(dir, ds, &config);
        if p.exists() {
            let fs = load_features(&p)?;
            config.ensure_same(fs.config())?;
            if fs.labels() == ds.labels() {
                log::info!("J = {scales}: reusing {}", p.display());
                return Ok(fs.vectors());
            }
        }
        let fs = scatter_dataset(ds, config)?;
        save_features(&p, &fs)?;
        return Ok(fs.vectors());
    }
    Ok(scatter_dataset(ds, config)?.vectors())
}

pub fn crossval(cfg: &RunConfig, data: &DatasetArgs, cache: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let ds = data.load(cfg)?;
    if let Some(dir) = cache {
        create_dir(dir)?;
    }
    let outcome = cross_validate(
        ds.labels(),
        &cfg.j_grid,
        |j| features_for_scale(cfg, &ds, j, cache),
        cfg.scattering,
        &cfg.cross_validation(),
    )?;
    if let Some(path) = out {
        let digest = manifest_of([
            ("dataset", ds.provenance().manifest.as_slice()),
            ("config", cfg.describe().as_bytes()),
        ]);
        let mut t = CsvTable::new("crossval", digest, &["J", "beta", "error_rate", "mean_dim"]);
        for r in &outcome.table {
            t.push(vec![r.scales.to_string(), r.beta.to_string(), r.error_rate.to_string(), r.mean_dim.to_string()])?;
        }
        t.write(path)?;
    }
    println!(
        "selected J = {}, beta = {} (validation error {:.2}% over {} settings)",
        outcome.scales,
        outcome.beta,
        100.0 * outcome.error_rate,
        outcome.table.len()
    );
    Ok(())
}

fn load_pair(model: &Path, features: &Path) -> Result<(TrainedClassifier, Manifest, FeatureSet)> {
    let (clf, manifest) = load_model(model)?;
    let fs = load_features(features)?;
    fs.ensure_compatible(&clf)?;
    Ok((clf, manifest, fs))
}

fn pair_digest(model: &Manifest, features: &FeatureSet) -> Manifest {
    manifest_of([("model", model.as_slice()), ("features", features.manifest().as_slice())])
}

pub fn predict(model: &Path, features: &Path, out: &Path) -> Result<()> {
    let (clf, manifest, fs) = load_pair(model, features)?;
    let vectors = fs.vectors();
    let preds = clf.classify_batch(&refs(&vectors))?;
    let mut t = CsvTable::new("predictions", pair_digest(&manifest, &fs), &["index", "label", "predicted", "dim"]);
    for (i, (p, l)) in preds.iter().zip(fs.labels()).enumerate() {
        t.push(vec![i.to_string(), l.to_string(), p.class_id.to_string(), p.selected_dim().to_string()])?;
    }
    t.write(out)?;
    let wrong = preds.iter().zip(fs.labels()).filter(|(p, l)| p.class_id != **l).count();
    println!("{} predictions written to {} ({wrong} disagree with labels)", preds.len(), out.display());
    Ok(())
}

/// Error rate, mean selected dimension and confusion counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub classes: Vec<u32>,
    /// `confusion[true][predicted]`, indexed like `classes`.
    pub confusion: Vec<Vec<usize>>,
    pub error_rate: f64,
    pub mean_dim: f64,
    pub count: usize,
}

pub fn evaluate_features(clf: &TrainedClassifier, fs: &FeatureSet) -> Result<Evaluation> {
    let vectors = fs.vectors();
    let preds = clf.classify_batch(&refs(&vectors))?;
    let mut classes = clf.class_ids();
    for &l in fs.labels() {
        if !classes.contains(&l) {
            classes.push(l);
        }
    }
    classes.sort_unstable();
    let pos = |c: u32| classes.iter().position(|&x| x == c).expect("class listed");
    let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
    let mut wrong = 0;
    let mut dims = 0;
    for (p, &l) in preds.iter().zip(fs.labels()) {
        confusion[pos(l)][pos(p.class_id)] += 1;
        wrong += usize::from(p.class_id != l);
        dims += p.selected_dim();
    }
    let n = preds.len().max(1) as f64;
    Ok(Evaluation {
        classes,
        confusion,
        error_rate: wrong as f64 / n,
        mean_dim: dims as f64 / n,
        count: preds.len(),
    })
}

pub fn evaluate(model: &Path, features: &Path, confusion: Option<&Path>, report: Option<&Path>) -> Result<()> {
    let (clf, manifest, fs) = load_pair(model, features)?;
    let ev = evaluate_features(&clf, &fs)?;
    let digest = pair_digest(&manifest, &fs);
    if let Some(path) = confusion {
        let mut header = vec!["true".to_string()];
        header.extend(ev.classes.iter().map(|c| format!("pred_{c}")));
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut t = CsvTable::new("confusion", digest, &header_refs);
        for (c, row) in ev.classes.iter().zip(&ev.confusion) {
            let mut r = vec![c.to_string()];
            r.extend(row.iter().map(usize::to_string));
            t.push(r)?;
        }
        t.write(path)?;
    }
    let json = serde_json::json!({
        "kind": "evaluation",
        "samples": ev.count,
        "error_percent": 100.0 * ev.error_rate,
        "mean_dim": ev.mean_dim,
        "J": clf.config.scales(),
        "beta": if clf.beta.is_finite() { serde_json::json!(clf.beta) } else { serde_json::json!("inf") },
        "inputs_sha256": hex(&digest),
    });
    if let Some(path) = report {
        let mut line = json.to_string();
        line.push('\n');
        std::fs::write(path, line).map_err(io_err(path))?;
    }
    println!(
        "error {:.2}% on {} samples; mean model dimension k = {:.1}",
        100.0 * ev.error_rate,
        ev.count,
        ev.mean_dim
    );
    println!("{json}");
    Ok(())
}

pub fn analyze_inout(model: &Path, features: &Path, k_max: usize, out: &Path) -> Result<()> {
    let (clf, manifest, fs) = load_pair(model, features)?;
    let vectors = fs.vectors();
    let r = refs(&vectors);
    let mut t = CsvTable::new("inout", pair_digest(&manifest, &fs), &["class", "k", "in", "out"]);
    for m in &clf.models {
        let k = k_max.min(m.dim());
        if k < k_max {
            log::warn!("class {}: model has only {} directions", m.class_id(), m.dim());
        }
        let c = intra_outer_curves(m, &r, fs.labels(), k)?;
        for (k, (i, o)) in c.inner.iter().zip(&c.outer).enumerate() {
            t.push(vec![m.class_id().to_string(), k.to_string(), i.to_string(), o.to_string()])?;
        }
    }
    t.write(out)?;
    println!("In/Out curves for {} classes written to {}", clf.models.len(), out.display());
    Ok(())
}

pub fn analyze_vardecay(
    cfg: &RunConfig,
    texture_dir: Option<&Path>,
    size: usize,
    count: usize,
    j_max: usize,
    out: &Path,
) -> Result<()> {
    let (samples, digest) = match texture_dir {
        Some(dir) => {
            let ds = load_texture_dir(dir)?;
            let d = ds.provenance().manifest;
            (ds.into_parts().0, d)
        }
        None => {
            let desc = format!("white-noise size={size} count={count} seed={}", cfg.seed);
            (white_noise_textures(size, count, cfg.seed), manifest_of([("source", desc.as_bytes())]))
        }
    };
    let rows = variance_decay(&samples, cfg.scattering, 1..=j_max)?;
    let digest = manifest_of([("samples", digest.as_slice()), ("config", cfg.describe().as_bytes())]);
    let mut t = CsvTable::new("vardecay", digest, &["J", "variance", "log_variance"]);
    for r in &rows {
        t.push(vec![r.scales.to_string(), r.variance.to_string(), r.variance.ln().to_string()])?;
        println!("J = {}: variance {:.6e}", r.scales, r.variance);
    }
    t.write(out)
}

pub fn analyze_layers(features: &Path, out: &Path) -> Result<()> {
    let fs = load_features(features)?;
    let orders = fs.config().max_order + 1;
    let mut energy = vec![0.0; orders];
    let mut fraction = vec![0.0; orders];
    for i in 0..fs.len() {
        let e = fs.scattering_vector(i)?.layer_energy();
        let total: f64 = e.iter().sum();
        for m in 0..orders {
            energy[m] += e[m];
            if total > 0.0 {
                fraction[m] += e[m] / total;
            }
        }
    }
    let n = fs.len().max(1) as f64;
    let mut t = CsvTable::new("layers", *fs.manifest(), &["order", "mean_energy", "mean_fraction"]);
    for m in 0..orders {
        t.push(vec![m.to_string(), (energy[m] / n).to_string(), (fraction[m] / n).to_string()])?;
        println!("order {m}: mean energy {:.6e}, mean fraction {:.4}", energy[m] / n, fraction[m] / n);
    }
    t.write(out)
}

/// Writes a synthetic benchmark as 16-bit PNG files, one directory per class.
pub fn synth_textures(cfg: &RunConfig, per_class: usize, size: usize, out: &Path) -> Result<()> {
    let ds = synthetic_textures(&TextureBenchmark {
        size,
        per_class,
        seed: cfg.seed,
    })?;
    let mut counters = std::collections::BTreeMap::new();
    for (g, &l) in ds.images().iter().zip(ds.labels()) {
        let dir = out.join(format!("class_{l:02}"));
        create_dir(&dir)?;
        let k = counters.entry(l).or_insert(0usize);
        save_texture_png(&dir.join(format!("tex_{:03}.png", *k)), g)?;
        *k += 1;
    }
    println!("{} textures written under {}", ds.len(), out.display());
    Ok(())
}

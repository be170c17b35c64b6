//! One function per subcommand. Each reads its prerequisites from the output
//! directory, writes its artifacts there and returns what it did.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use selfintro::atlas::{
    apply_permutation, brainbow, class_density, expected_latent, expected_patterns, sort_units,
    DensityGrid, UnitAssignment, CLASS_PALETTE,
};
use selfintro::classifier::{
    argmax, record_activations, train_classifier_with, ActivationRecords, ClassifierData,
    ClassifierModel, NoiseInjection,
};
use selfintro::datasets::{load_idx, split, Dataset, NUM_CLASSES};
use selfintro::engine::predict_batch;
use selfintro::experiments::{
    accuracy_under_noise, fgsm_attack, noise_constellation, violin_report, AttackConfig,
    AttackTrajectory, Stack,
};
use selfintro::export::{
    assignment_csv, attacks_csv, brainbow_svg, constellation_csv, density_csv, estimator_heatmap,
    latents_csv, patterns_csv, scatter_svg, trajectory_csv, ScatterPoint, ScatterStyle,
};
use selfintro::introspector::{
    initial_autoencoder, mmd_sq_rows, nearest_neighbor_agreement, pairwise_distance_medians,
    prior_samples, train_autoencoder, train_estimator, AutoencoderModel, EstimatorModel,
    LatentPoint,
};
use selfintro::persist::{load_model, save_model, Persist};

use crate::config::{seed_offset, RunConfig, TEST_IMAGES, TEST_LABELS, TRAIN_IMAGES, TRAIN_LABELS};

pub const CLASSIFIER: &str = "classifier.sint";
pub const CLASSIFIER_SORTED: &str = "classifier_sorted.sint";
pub const AUTOENCODER: &str = "autoencoder.sint";
pub const ESTIMATOR: &str = "estimator.sint";
pub const SNAPSHOTS: &str = "snapshots.sint";
pub const ASSIGNMENT: &str = "assignment.json";
pub const RUN_LOG: &str = "run_log.jsonl";

/// Points drawn in scatter plots of the whole test set.
const SCATTER_LIMIT: usize = 5000;
/// Points used for pairwise latent distance medians.
const PAIRWISE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Default, Serialize)]
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    pub metrics: Map<String, Value>,
}

impl Outcome {
    fn metric(&mut self, key: &str, value: impl Serialize) {
        self.metrics
            .insert(key.to_string(), serde_json::to_value(value).expect("metric serializes"));
    }
}

pub struct Data {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

pub struct Workspace {
    pub config: RunConfig,
}

impl Workspace {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        std::fs::create_dir_all(&config.output_dir)
            .with_context(|| format!("creating {}", config.output_dir.display()))?;
        Ok(Workspace { config })
    }

    pub fn dir(&self) -> &Path {
        &self.config.output_dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir().join(name)
    }

    pub fn load_data(&self) -> Result<Data> {
        let d = &self.config.data;
        let full = load_idx(d.dir.join(TRAIN_IMAGES), d.dir.join(TRAIN_LABELS))?;
        let mut test = load_idx(d.dir.join(TEST_IMAGES), d.dir.join(TEST_LABELS))?;
        if let Some(n) = d.test_limit {
            test = test.head(n.min(test.len()));
        }
        let (train, validation, _) = split(&full, &self.config.split_spec())?;
        Ok(Data {
            train,
            validation,
            test,
        })
    }

    /// Loads an artifact another stage produced, naming that stage when the
    /// file is absent.
    pub fn require<M: Persist>(&self, file: &str, stage: &str, command: &str) -> Result<M> {
        let path = self.path(file);
        if !path.is_file() {
            bail!(
                "missing {stage} artifact {}; run `{command}` first",
                path.display()
            );
        }
        load_model(&path).with_context(|| format!("loading {stage} from {}", path.display()))
    }

    pub fn classifier(&self) -> Result<ClassifierModel> {
        self.require(CLASSIFIER, "classifier", "train")
    }

    pub fn autoencoder(&self) -> Result<AutoencoderModel> {
        self.require(AUTOENCODER, "autoencoder", "autoencode")
    }

    pub fn estimator(&self) -> Result<EstimatorModel> {
        self.require(ESTIMATOR, "estimator", "estimate")
    }

    pub fn assignment(&self) -> Result<UnitAssignment> {
        let path = self.path(ASSIGNMENT);
        if !path.is_file() {
            bail!(
                "missing atlas artifact {}; run `atlas` first",
                path.display()
            );
        }
        let text = std::fs::read_to_string(&path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn write(&self, out: &mut Outcome, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        out.artifacts.push(path);
        Ok(())
    }

    fn save<M: Persist>(&self, out: &mut Outcome, name: &str, model: &M) -> Result<()> {
        let path = self.path(name);
        save_model(model, &path)?;
        out.artifacts.push(path);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions {
    pub noise_inject: Option<f64>,
    /// Record the first `n` test samples at every cycle end.
    pub history_probe: Option<usize>,
}

fn history_csv<T: Serialize>(rows: &[T]) -> String {
    let mut out = String::new();
    let values: Vec<Value> = rows.iter().map(|r| serde_json::to_value(r).unwrap()).collect();
    let Some(Value::Object(first)) = values.first() else {
        return out;
    };
    let keys: Vec<&String> = first.keys().collect();
    out.push_str(&keys.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(","));
    out.push('\n');
    for v in &values {
        let cells: Vec<String> = keys
            .iter()
            .map(|k| match &v[k.as_str()] {
                Value::Null => String::new(),
                x => x.to_string(),
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn records_csv(r: &ActivationRecords) -> String {
    let mut out = String::from("sample_id,label,cycle,predicted,error\n");
    for rec in r.iter() {
        let cycle = rec.cycle.map(|c| c.to_string()).unwrap_or_default();
        let pred = argmax(&rec.y_hat.to_vec());
        out.push_str(&format!(
            "{},{},{cycle},{pred},{}\n",
            rec.sample_id, rec.y_true, rec.e
        ));
    }
    out
}

pub fn train(ws: &Workspace, opts: TrainOptions) -> Result<Outcome> {
    let c = &ws.config;
    let data = ws.load_data()?;
    let probe = opts
        .history_probe
        .map(|n| data.test.head(n.min(data.test.len())));
    let spec = c.architecture.spec(c.classifier.dropout_keep)?;
    let config = c.classifier.train_config(c.stage_seed(seed_offset::CLASSIFIER));
    let trained = train_classifier_with(
        spec,
        ClassifierData {
            train: &data.train,
            validation: &data.validation,
            test: Some(&data.test),
        },
        &config,
        probe.as_ref(),
        opts.noise_inject.map(|sigma_max| NoiseInjection { sigma_max }),
    )?;
    let model = &trained.model;
    let mut out = Outcome::default();
    ws.save(&mut out, CLASSIFIER, model)?;
    ws.write(&mut out, "classifier_history.csv", history_csv(&model.history))?;

    let mut rng = ChaCha8Rng::seed_from_u64(c.stage_seed(seed_offset::ROBUSTNESS));
    let mut robustness = String::from("sigma,accuracy\n");
    let mut curve = Vec::new();
    for &sigma in &c.experiments.robustness_sigmas {
        let acc = accuracy_under_noise(model, &data.test, sigma, &mut rng)?;
        robustness.push_str(&format!("{sigma},{acc}\n"));
        curve.push(json!({ "sigma": sigma, "accuracy": acc }));
    }
    ws.write(&mut out, "robustness.csv", robustness)?;

    if let Some(snaps) = &trained.snapshots {
        ws.save(&mut out, SNAPSHOTS, snaps)?;
        ws.write(&mut out, "snapshots.csv", records_csv(snaps))?;
    }
    out.metric("test_accuracy", model.accuracy(&data.test)?);
    out.metric("stop", trained.report.stop);
    out.metric("iterations", trained.report.iterations);
    out.metric("noise_sigma_max", opts.noise_inject);
    out.metric("accuracy_under_noise", curve);
    Ok(out)
}

pub fn autoencode(ws: &Workspace) -> Result<Outcome> {
    let c = &ws.config;
    let classifier = ws.classifier()?;
    let data = ws.load_data()?;
    let train_rec = record_activations(&classifier, &data.train)?;
    let val_rec = record_activations(&classifier, &data.validation)?;
    let config = c
        .autoencoder
        .stage
        .train_config(c.stage_seed(seed_offset::AUTOENCODER));
    let before = initial_autoencoder(&train_rec, &config, c.autoencoder.mmd_weight)?;
    let trained = train_autoencoder(&train_rec, &val_rec, &config, c.autoencoder.mmd_weight)?;
    let ae = &trained.model;
    let mut out = Outcome::default();
    ws.save(&mut out, AUTOENCODER, ae)?;
    ws.write(&mut out, "autoencoder_history.csv", history_csv(&ae.history))?;

    let mut rng = ChaCha8Rng::seed_from_u64(c.stage_seed(seed_offset::PRIOR));
    let prior = prior_samples(c.experiments.prior_samples, &mut rng);
    let m = c.experiments.prior_samples.min(train_rec.len());
    let probe = train_rec.hidden.slice(ndarray::s![..m, ..]);
    let mmd_before = mmd_sq_rows(before.encode_batch(probe)?.view(), prior.view())?;
    let mmd_after = mmd_sq_rows(ae.encode_batch(probe)?.view(), prior.view())?;

    let test_rec = record_activations(&classifier, &data.test)?;
    let z_test = ae.encode_records(&test_rec)?;
    let z_train = ae.encode_records(&train_rec)?;
    ws.write(
        &mut out,
        "latents_test.csv",
        latents_csv(&test_rec.sample_ids, &z_test, &test_rec.labels, None),
    )?;
    let n = z_test.len().min(SCATTER_LIMIT);
    let points: Vec<ScatterPoint> = (0..n)
        .map(|i| ScatterPoint {
            z: z_test[i],
            class: test_rec.labels[i] as usize,
        })
        .collect();
    let style = ScatterStyle {
        title: Some("test latents by true class".into()),
        ..Default::default()
    };
    ws.write(&mut out, "latents_test.svg", scatter_svg(&points, &style)?)?;

    let (within, between) = pairwise_distance_medians(&z_test, &test_rec.labels, PAIRWISE_LIMIT)?;
    let nn = nearest_neighbor_agreement(&z_train, &train_rec.labels, &z_test, &test_rec.labels)?;
    out.metric("stop", trained.report.stop);
    out.metric("mmd_before", mmd_before);
    out.metric("mmd_after", mmd_after);
    out.metric("reconstruction_val", ae.reconstruction_error(val_rec.hidden.view())?);
    out.metric("median_within_class", within);
    out.metric("median_between_class", between);
    out.metric("nearest_neighbor_agreement", nn);
    Ok(out)
}

pub fn estimate(ws: &Workspace) -> Result<Outcome> {
    let c = &ws.config;
    let ae = ws.autoencoder()?;
    let classifier = ws.classifier()?;
    let data = ws.load_data()?;
    let train_rec = record_activations(&classifier, &data.train)?;
    let val_rec = record_activations(&classifier, &data.validation)?;
    let config = c
        .estimator
        .stage
        .train_config(c.stage_seed(seed_offset::ESTIMATOR));
    let trained = train_estimator(&ae, &train_rec, &val_rec, &config, c.estimator.target_floor)?;
    let mut out = Outcome::default();
    ws.save(&mut out, ESTIMATOR, &trained.model)?;
    ws.write(
        &mut out,
        "estimator_history.csv",
        history_csv(&trained.model.history),
    )?;
    let heat = estimator_heatmap(&trained.model, &c.atlas)?;
    let mut csv = String::from("z1,z2,e_log10\n");
    for ((i, j), v) in heat.indexed_iter() {
        csv.push_str(&format!("{},{},{v}\n", c.atlas.coord(i), c.atlas.coord(j)));
    }
    ws.write(&mut out, "estimator_grid.csv", csv)?;
    out.metric("stop", trained.report.stop);
    out.metric(
        "validation_error",
        trained.report.cycles.last().map(|s| s.validation_error),
    );
    Ok(out)
}

pub fn atlas(ws: &Workspace) -> Result<Outcome> {
    let c = &ws.config;
    let classifier = ws.classifier()?;
    let ae = ws.autoencoder()?;
    let data = ws.load_data()?;
    let rec = record_activations(&classifier, &data.train)?;
    let z = ae.encode_records(&rec)?;
    let mut out = Outcome::default();

    let mut grids: Vec<DensityGrid> = Vec::with_capacity(NUM_CLASSES);
    let mut gaps = Vec::with_capacity(NUM_CLASSES);
    for k in 0..NUM_CLASSES {
        let pts: Vec<LatentPoint> = z
            .iter()
            .zip(&rec.labels)
            .filter(|(_, &l)| l as usize == k)
            .map(|(p, _)| *p)
            .collect();
        let g = class_density(&pts, k, &c.atlas)?;
        let e = expected_latent(&g);
        let n = pts.len() as f64;
        let mean = LatentPoint::new(
            pts.iter().map(|p| p.z1).sum::<f64>() / n,
            pts.iter().map(|p| p.z2).sum::<f64>() / n,
        );
        gaps.push(e.distance(&mean));
        grids.push(g);
    }
    ws.write(&mut out, "densities.csv", density_csv(&grids))?;

    let patterns = expected_patterns(&ae, &z, &rec.labels, NUM_CLASSES, &c.atlas)?;
    ws.write(&mut out, "expected_patterns.csv", patterns_csv(&patterns))?;
    let widths = classifier.spec.hidden_widths();
    let assignment = sort_units(&patterns, &widths)?;
    ws.write(
        &mut out,
        ASSIGNMENT,
        serde_json::to_string_pretty(&assignment)?,
    )?;
    let colors = brainbow(&patterns, &CLASS_PALETTE)?;
    ws.write(
        &mut out,
        "assignment.csv",
        assignment_csv(&assignment, Some(&colors)),
    )?;
    ws.write(&mut out, "brainbow.svg", brainbow_svg(&colors, &widths)?)?;
    ws.write(
        &mut out,
        "brainbow_sorted.svg",
        brainbow_svg(&assignment.permute_units(&colors), &widths)?,
    )?;

    let mut shares = Vec::new();
    let mut offset = 0;
    for &w in &widths {
        let mut counts = [0usize; NUM_CLASSES];
        for &k in &assignment.classes[offset..offset + w] {
            counts[k] += 1;
        }
        shares.push(counts.to_vec());
        offset += w;
    }
    out.metric("expected_latent_gap", &gaps);
    out.metric("units_per_class", shares);
    Ok(out)
}

pub fn reorder(ws: &Workspace) -> Result<Outcome> {
    let classifier = ws.classifier()?;
    let assignment = ws.assignment()?;
    let sorted = apply_permutation(&classifier, &assignment)?;
    let data = ws.load_data()?;
    let mut out = Outcome::default();
    ws.save(&mut out, CLASSIFIER_SORTED, &sorted)?;
    let before = classifier.predict_labels(data.test.inputs().view())?;
    let after = sorted.predict_labels(data.test.inputs().view())?;
    let agree = before.iter().zip(&after).filter(|(a, b)| a == b).count();
    let n = data.test.len().min(1000);
    let x = data.test.inputs().slice(ndarray::s![..n, ..]);
    let y0 = predict_batch(&classifier.spec, &classifier.params, x)?;
    let y1 = predict_batch(&sorted.spec, &sorted.params, x)?;
    let max_dy = (&y0 - &y1).iter().fold(0f32, |m, v| m.max(v.abs()));
    out.metric("label_agreement", agree as f64 / data.test.len().max(1) as f64);
    out.metric("max_output_change", max_dy);
    Ok(out)
}

fn test_scatter(stack: Stack<'_>, test: &Dataset) -> Result<Vec<ScatterPoint>> {
    let n = test.len().min(SCATTER_LIMIT);
    let r = stack.read(test.inputs().slice(ndarray::s![..n, ..]))?;
    Ok((0..n)
        .map(|i| ScatterPoint {
            z: r.latents[i],
            class: test.label(i),
        })
        .collect())
}

pub fn constellation(ws: &Workspace) -> Result<Outcome> {
    let c = &ws.config;
    let e = &c.experiments;
    let classifier = ws.classifier()?;
    let ae = ws.autoencoder()?;
    let est = ws.estimator()?;
    let stack = Stack {
        classifier: &classifier,
        autoencoder: &ae,
        estimator: &est,
    };
    let data = ws.load_data()?;
    if e.constellation_sample >= data.test.len() {
        bail!(
            "constellation sample {} is outside the {} test samples",
            e.constellation_sample,
            data.test.len()
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.stage_seed(seed_offset::CONSTELLATION));
    let cs = noise_constellation(
        stack,
        &data.test,
        e.constellation_sample,
        &e.constellation_sigmas,
        e.constellation_draws,
        &mut rng,
    )?;
    let mut out = Outcome::default();
    ws.write(&mut out, "constellation.csv", constellation_csv(&cs))?;
    let points: Vec<ScatterPoint> = cs
        .iter()
        .flat_map(|c| {
            c.points.iter().map(|p| ScatterPoint {
                z: p.z,
                class: p.label,
            })
        })
        .collect();
    let style = ScatterStyle {
        heatmap: Some(estimator_heatmap(&est, &c.atlas)?),
        grid: c.atlas,
        title: Some(format!("noisy copies of test sample {}", e.constellation_sample)),
        radius: 2.0,
        ..Default::default()
    };
    ws.write(&mut out, "constellation.svg", scatter_svg(&points, &style)?)?;
    let disp: Vec<Value> = cs
        .iter()
        .map(|c| json!({ "sigma": c.sigma, "mean_displacement": c.mean_displacement() }))
        .collect();
    out.metric("displacement", disp);
    Ok(out)
}

/// Seeded choice of test samples to attack, ascending.
pub fn attack_samples(test_len: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = sample_indices(&mut rng, test_len, count.min(test_len)).into_vec();
    v.sort_unstable();
    v
}

pub fn attack(ws: &Workspace) -> Result<Outcome> {
    let c = &ws.config;
    let e = &c.experiments;
    let classifier = ws.classifier()?;
    let ae = ws.autoencoder()?;
    let est = ws.estimator()?;
    let stack = Stack {
        classifier: &classifier,
        autoencoder: &ae,
        estimator: &est,
    };
    let data = ws.load_data()?;
    let samples = attack_samples(
        data.test.len(),
        e.attack_samples,
        c.stage_seed(seed_offset::ATTACK),
    );
    let config = AttackConfig {
        eps: e.attack_eps,
        max_steps: e.attack_steps,
        continue_after_success: e.attack_continue,
    };
    let mut out = Outcome::default();
    let mut all: Vec<AttackTrajectory> = Vec::new();
    for &i in &samples {
        for target in (0..NUM_CLASSES).filter(|&t| t != data.test.label(i)) {
            let t = fgsm_attack(stack, data.test.input(i), i, target, &config)?;
            ws.write(
                &mut out,
                &format!("attacks/sample{i:05}_target{target}.csv"),
                trajectory_csv(&t),
            )?;
            all.push(t);
        }
    }
    ws.write(&mut out, "attacks.csv", attacks_csv(&all))?;
    let style = ScatterStyle {
        heatmap: Some(estimator_heatmap(&est, &c.atlas)?),
        grid: c.atlas,
        paths: all
            .iter()
            .map(|t| t.steps.iter().map(|s| s.z).collect())
            .collect(),
        title: Some("FGSM trajectories".into()),
        ..Default::default()
    };
    ws.write(
        &mut out,
        "attacks.svg",
        scatter_svg(&test_scatter(stack, &data.test)?, &style)?,
    )?;
    let successes = all.iter().filter(|t| t.success).count();
    out.metric("attacks", all.len());
    out.metric("success_fraction", successes as f64 / all.len().max(1) as f64);
    Ok(out)
}

pub fn violin(ws: &Workspace) -> Result<Outcome> {
    let classifier = ws.classifier()?;
    let ae = ws.autoencoder()?;
    let est = ws.estimator()?;
    let stack = Stack {
        classifier: &classifier,
        autoencoder: &ae,
        estimator: &est,
    };
    let data = ws.load_data()?;
    let report = violin_report(stack, &data.test)?;
    let mut out = Outcome::default();
    ws.write(&mut out, "violin_samples.csv", report.samples_csv())?;
    ws.write(&mut out, "violin_summary.csv", report.summary_csv())?;
    out.metric("accuracy", report.accuracy());
    out.metric("median_gap", report.median_gap());
    out.metric("misclassified", report.all_misclassified().len());
    Ok(out)
}

/// Re-reads a stored artifact and renders it as CSV or SVG next to it (or
/// at `dest`).
pub fn export(ws: &Workspace, artifact: &Path, dest: Option<&Path>) -> Result<Outcome> {
    let src = if artifact.is_relative() && !artifact.exists() {
        ws.path(&artifact.to_string_lossy())
    } else {
        artifact.to_path_buf()
    };
    if !src.is_file() {
        bail!("artifact {} does not exist", src.display());
    }
    let ext = src.extension().and_then(|e| e.to_str()).unwrap_or("");
    let (body, default_ext) = match ext {
        "sint" => (export_container(ws, &src)?, "csv"),
        "csv" => (export_csv(ws, &src)?, "svg"),
        "json" => {
            let a: UnitAssignment = serde_json::from_str(&std::fs::read_to_string(&src)?)?;
            (assignment_csv(&a, None), "csv")
        }
        other => bail!("don't know how to export `.{other}` files"),
    };
    let dest = match dest {
        Some(d) => d.to_path_buf(),
        None => {
            let stem = src.file_stem().unwrap().to_string_lossy();
            src.with_file_name(format!("{stem}.export.{default_ext}"))
        }
    };
    std::fs::write(&dest, body).with_context(|| format!("writing {}", dest.display()))?;
    Ok(Outcome {
        artifacts: vec![dest],
        metrics: Map::new(),
    })
}

fn export_container(ws: &Workspace, src: &Path) -> Result<String> {
    let bytes = std::fs::read(src)?;
    let kind = selfintro::persist::peek_kind(&bytes)?;
    let name = src.display().to_string();
    use selfintro::persist::decode_container;
    Ok(match kind.as_str() {
        "classifier" => history_csv(&decode_container::<ClassifierModel>(&bytes, &name)?.history),
        "autoencoder" => {
            history_csv(&decode_container::<AutoencoderModel>(&bytes, &name)?.history)
        }
        "estimator" => {
            let est = decode_container::<EstimatorModel>(&bytes, &name)?;
            let g = &ws.config.atlas;
            let heat = estimator_heatmap(&est, g)?;
            let mut csv = String::from("z1,z2,e_log10\n");
            for ((i, j), v) in heat.indexed_iter() {
                csv.push_str(&format!("{},{},{v}\n", g.coord(i), g.coord(j)));
            }
            csv
        }
        "records" => records_csv(&decode_container::<ActivationRecords>(&bytes, &name)?),
        other => bail!("unknown container kind `{other}`"),
    })
}

/// Any CSV with `z1`, `z2` columns becomes a scatter; a `step` column turns
/// it into a single trajectory.
fn export_csv(ws: &Workspace, src: &Path) -> Result<String> {
    let text = std::fs::read_to_string(src)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let (Some(i1), Some(i2)) = (col("z1"), col("z2")) else {
        bail!("{} has no z1/z2 columns", src.display());
    };
    let class_col = col("label");
    let mut points = Vec::new();
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let z = LatentPoint::new(cells[i1].parse()?, cells[i2].parse()?);
        let class = match class_col {
            Some(k) => cells[k].parse()?,
            None => 0,
        };
        points.push(ScatterPoint { z, class });
    }
    let mut style = ScatterStyle {
        grid: ws.config.atlas,
        title: Some(src.file_name().unwrap().to_string_lossy().into_owned()),
        ..Default::default()
    };
    if col("step").is_some() {
        style.paths = vec![points.iter().map(|p| p.z).collect()];
    }
    Ok(scatter_svg(&points, &style)?)
}

/// Test-set latents of a model pair, for callers outside the pipeline.
pub fn test_latents(
    classifier: &ClassifierModel,
    ae: &AutoencoderModel,
    test: &Dataset,
) -> Result<Vec<LatentPoint>> {
    let rec = record_activations(classifier, test)?;
    Ok(ae.encode_records(&rec)?)
}

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ndarray::Array2;

use nfst::dataset::{
    load_featureset, load_labels, save_featureset, split_train_test, synth_generate, FeatureSet,
    SplitSpec,
};
use nfst::eval::{distance_matrix, evaluate, fuse_scores, multi_query_pool, DEFAULT_RANKS};
use nfst::fmat::{read_matrix, write_fmat, MatrixFormat};
use nfst::kernel::{train_kernel_nfst_with_report, KernelKind, KernelSpec, RbfWidth};
use nfst::linear::train_linear_nfst_with_report;
use nfst::model_io::{load_model, save_model, Model};
use nfst::numeric::Tolerances;
use nfst::semisup::{train_semi_supervised, HeatWidth, SemiConfig};

use crate::{
    usage, AutoOrReal, EvalArgs, FormatArg, FuseArgs, KernelArg, ProjectArgs, SemiKernelArg,
    SemisupArgs, SynthArgs, TrainArgs,
};

fn tolerances(tol: f64, collapse_tol: f64) -> Result<Tolerances> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(usage(format!("--tol must be a positive real, got {tol}")));
    }
    if !(collapse_tol > 0.0 && collapse_tol.is_finite()) {
        return Err(usage(format!(
            "--collapse-tol must be a positive real, got {collapse_tol}"
        )));
    }
    Ok(Tolerances {
        rank_tol: tol,
        collapse_tol,
    })
}

fn kernel_spec(kind: KernelKind, sigma: AutoOrReal) -> Result<KernelSpec> {
    let width = match sigma {
        AutoOrReal::Auto => RbfWidth::Auto,
        AutoOrReal::Explicit(v) => {
            if kind != KernelKind::Rbf {
                return Err(usage("--sigma applies only to --kernel rbf"));
            }
            RbfWidth::Explicit(v)
        }
    };
    Ok(KernelSpec { kind, width })
}

fn fmt_eigs(eigs: &[f64]) -> String {
    let parts: Vec<String> = eigs.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let tol = tolerances(args.tol, args.collapse_tol)?;
    let fs = load_featureset(&args.features, &args.labels)?;
    log::info!(
        "training set: N={} samples, d={}, C={} classes",
        fs.num_samples(),
        fs.dim(),
        fs.num_classes()
    );

    let model = match args.kernel {
        KernelArg::None => {
            let (model, report) = train_linear_nfst_with_report(&fs, &tol)?;
            log::info!("basis rank: {}", report.basis_rank);
            log::info!(
                "eigenvalue tail: null {} of max {:.3e}",
                fmt_eigs(&report.null_eigenvalues),
                report.max_eigenvalue
            );
            log::info!(
                "collapse residual: {:.3e} (relative), min between-class scatter: {:.3e}",
                report.max_collapse_ratio,
                report.min_between_scatter
            );
            Model::Linear(model)
        }
        KernelArg::Rbf | KernelArg::Linear => {
            let kind = if args.kernel == KernelArg::Rbf {
                KernelKind::Rbf
            } else {
                KernelKind::Linear
            };
            let spec = kernel_spec(kind, args.sigma)?;
            let (model, report) = train_kernel_nfst_with_report(&fs, &spec, &tol)?;
            match report.sigma {
                Some(s) => log::info!("resolved rbf width: sigma={s}"),
                None => log::info!("linear kernel (no width)"),
            }
            log::info!("kernel pca rank: {}", report.kpca_rank);
            log::info!(
                "eigenvalue tail: null {} of max {:.3e}",
                fmt_eigs(&report.null_eigenvalues),
                report.max_eigenvalue
            );
            log::info!(
                "collapse residual: {:.3e} (relative), min between-class scatter: {:.3e}",
                report.max_collapse_ratio,
                report.min_between_scatter
            );
            Model::Kernel(model)
        }
    };

    save_model(&model, &args.model)?;
    log::info!(
        "model ({}, {} directions) saved to {}",
        model.kind_name(),
        model.out_dim(),
        args.model.display()
    );
    Ok(())
}

fn print_report(report: &nfst::eval::EvalReport) {
    for &rank in &report.ranks_reported {
        println!("rank-{rank} {:.6}", report.rank_accuracy(rank));
    }
    println!("mAP {:.6}", report.map);
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let report = match &args.dist {
        Some(dist_path) => {
            let dist = read_matrix(dist_path)?;
            let probe = load_labels(&args.probe_labels)?;
            let gallery = load_labels(&args.gallery_labels)?;
            evaluate(
                &dist.view(),
                &probe.person_ids,
                &gallery.person_ids,
                &DEFAULT_RANKS,
            )?
        }
        None => {
            // flags enforced by clap: model mode requires the feature inputs
            let model = load_model(args.model.as_ref().expect("required by clap"))?;
            let probe = load_featureset(
                args.probe_features.as_ref().expect("required by clap"),
                &args.probe_labels,
            )?;
            let gallery = load_featureset(
                args.gallery_features.as_ref().expect("required by clap"),
                &args.gallery_labels,
            )?;

            let (probe_x, probe_ids): (Array2<f64>, Vec<String>) = if args.multi_query {
                let (pooled, groups) =
                    multi_query_pool(&probe.features(), probe.person_ids())?;
                log::info!(
                    "multi-query: pooled {} probe samples into {} queries",
                    probe.num_samples(),
                    groups.len()
                );
                (pooled, groups)
            } else {
                (probe.features().to_owned(), probe.person_ids().to_vec())
            };

            let yp = model.project(&probe_x.view())?;
            let yg = model.project(&gallery.features())?;
            let dist = distance_matrix(&yp.view(), &yg.view())?;
            if let Some(path) = &args.dist_out {
                write_fmat(path, &dist.view())?;
                log::info!("distance matrix saved to {}", path.display());
            }
            evaluate(&dist.view(), &probe_ids, gallery.person_ids(), &DEFAULT_RANKS)?
        }
    };

    print_report(&report);
    if let Some(path) = &args.out {
        report.write_csv(path)?;
        log::info!("report saved to {}", path.display());
    }
    Ok(())
}

pub fn semisup(args: &SemisupArgs) -> Result<()> {
    let tol = tolerances(args.tol, args.collapse_tol)?;
    if args.k < 1 {
        return Err(usage("--k must be >= 1"));
    }
    if !(args.f > 0.0 && args.f <= 1.0) {
        return Err(usage(format!("--f must lie in (0, 1], got {}", args.f)));
    }
    if args.max_iters < 1 {
        return Err(usage("--max-iters must be >= 1"));
    }
    let kind = match args.kernel {
        SemiKernelArg::Rbf => KernelKind::Rbf,
        SemiKernelArg::Linear => KernelKind::Linear,
    };
    let cfg = SemiConfig {
        k: args.k,
        fraction: args.f,
        heat_width: match args.heat_width {
            AutoOrReal::Auto => HeatWidth::Auto,
            AutoOrReal::Explicit(v) => HeatWidth::Explicit(v),
        },
        max_iters: args.max_iters,
        kernel: kernel_spec(kind, args.sigma)?,
    };

    let labeled = load_featureset(&args.labeled_features, &args.labeled_labels)?;
    let unlabeled = load_featureset(&args.unlabeled_features, &args.unlabeled_labels)?;
    log::info!(
        "labeled: N={} C={}, unlabeled: N={}, k={}, f={}, max_iters={}",
        labeled.num_samples(),
        labeled.num_classes(),
        unlabeled.num_samples(),
        cfg.k,
        cfg.fraction,
        cfg.max_iters
    );

    let outcome = train_semi_supervised(&labeled, &unlabeled, &cfg, &tol)?;
    for it in &outcome.iterations {
        log::info!(
            "iteration {}: mean k-NN distance {}, {} pseudo-classes",
            it.iter,
            it.mean_knn_dist,
            it.num_pseudo_classes
        );
    }
    if let Some(path) = &args.diag {
        let mut csv = String::from("iter,mean_knn_dist,num_pseudo_classes\n");
        for it in &outcome.iterations {
            csv.push_str(&format!(
                "{},{},{}\n",
                it.iter, it.mean_knn_dist, it.num_pseudo_classes
            ));
        }
        fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
        log::info!("diagnostics saved to {}", path.display());
    }

    let model = Model::Kernel(outcome.model);
    save_model(&model, &args.model)?;
    log::info!(
        "model ({} directions, {} accepted iterations) saved to {}",
        model.out_dim(),
        outcome.iterations.len(),
        args.model.display()
    );
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let format = match args.format {
        FormatArg::Fmat => MatrixFormat::Fmat,
        FormatArg::Csv => MatrixFormat::Csv,
    };
    let fs = synth_generate(
        args.ids,
        args.views,
        args.dim,
        args.samples,
        args.view_shift,
        args.noise,
        args.seed,
    )?;
    log::info!(
        "generated N={} samples, d={}, {} identities x {} views",
        fs.num_samples(),
        fs.dim(),
        args.ids,
        args.views
    );

    match (&args.features_out, &args.labels_out, &args.bench_dir) {
        (Some(fpath), Some(lpath), None) => {
            save_featureset(&fs, fpath, lpath, format)?;
            log::info!("features -> {}, labels -> {}", fpath.display(), lpath.display());
            Ok(())
        }
        (None, None, Some(dir)) => synth_bench(args, &fs, dir, format),
        _ => Err(usage(
            "pass either --features-out with --labels-out, or --bench-dir",
        )),
    }
}

/// Benchmark layout: identities split into train/test; test samples from the
/// first camera become probes, the remaining cameras the gallery.
fn synth_bench(args: &SynthArgs, fs: &FeatureSet, dir: &Path, format: MatrixFormat) -> Result<()> {
    let spec = SplitSpec::IdentityFraction {
        train_fraction: args.train_fraction,
        seed: args.split_seed,
    };
    let (train, test) = split_train_test(fs, &spec)?;
    let probe_idx: Vec<usize> = (0..test.num_samples())
        .filter(|&j| test.camera_ids()[j] == "cam0")
        .collect();
    let gallery_idx: Vec<usize> = (0..test.num_samples())
        .filter(|&j| test.camera_ids()[j] != "cam0")
        .collect();
    let probe = test.select(&probe_idx);
    let gallery = test.select(&gallery_idx);

    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let ext = match format {
        MatrixFormat::Fmat => "fmat",
        MatrixFormat::Csv => "csv",
    };
    for (set, name) in [(&train, "train"), (&probe, "probe"), (&gallery, "gallery")] {
        let fpath = dir.join(format!("{name}.{ext}"));
        let lpath = dir.join(format!("{name}_labels.csv"));
        save_featureset(set, &fpath, &lpath, format)?;
    }
    log::info!(
        "benchmark in {}: train N={} (C={}), probe N={}, gallery N={}",
        dir.display(),
        train.num_samples(),
        train.num_classes(),
        probe.num_samples(),
        gallery.num_samples()
    );
    Ok(())
}

pub fn fuse(args: &FuseArgs) -> Result<()> {
    let a = read_matrix(&args.dist_a)?;
    let b = read_matrix(&args.dist_b)?;
    let fused = fuse_scores(&a.view(), &b.view())?;
    write_fmat(&args.out, &fused.view())?;
    log::info!(
        "fused {}x{} distance matrix saved to {}",
        fused.nrows(),
        fused.ncols(),
        args.out.display()
    );
    Ok(())
}

pub fn project(args: &ProjectArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let x = read_matrix(&args.features)?;
    let y = model.project(&x.view())?;
    write_fmat(&args.out, &y.view())?;
    log::info!(
        "projected {} samples from d={} to {} dimensions -> {}",
        x.ncols(),
        x.nrows(),
        y.nrows(),
        args.out.display()
    );
    Ok(())
}

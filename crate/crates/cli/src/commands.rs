use std::fs;
use std::path::Path;

use pai_core::analysis::Arithmetic;
use pai_core::io::{distribution_to_csv, operator_to_csv};
use pai_core::mnist::{
    analyze_classifier, fit_centroid_classifier, init_distribution, read_mnist_csv,
    ImageAbstractionConfig,
};
use pai_core::scalar::{format_decimal, parse_decimal};
use pai_core::{
    brute_force_push, build_A, build_G, compare_abstract, lift_function, load_network, Error,
    Layer, Network, Pipeline, PlanSpec, Rational, Result, Scalar, Zonotope,
};
use serde_json::{json, Value};

use crate::args::{Command, LiftArgs, MnistArgs, RunArgs, ZonotopeArgs};
use crate::report::{
    cell_map, config_hash, exact_cell_map, exact_number, number, plot_table, read, write,
    write_json,
};

pub fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Analyze(a) => with_plan(a, Mode::Analyze),
        Command::Oracle(a) => with_plan(a, Mode::Oracle),
        Command::Compare(a) => with_plan(a, Mode::Compare),
        Command::Lift(a) => lift(a),
        Command::Zonotope(a) => zonotope(a),
        Command::Mnist(a) => mnist(a),
    }
}

#[derive(Clone, Copy)]
enum Mode {
    Analyze,
    Oracle,
    Compare,
}

struct Loaded {
    network: Network<f64>,
    spec: PlanSpec,
    hash: String,
}

fn load(network: &Path, config: &Path) -> Result<Loaded> {
    let net_bytes = read(network)?;
    let cfg_bytes = read(config)?;
    Ok(Loaded {
        network: load_network(&net_bytes)?,
        spec: PlanSpec::from_json(&cfg_bytes)?,
        hash: config_hash(&net_bytes, &cfg_bytes),
    })
}

fn with_plan(args: &RunArgs, mode: Mode) -> Result<()> {
    let loaded = load(&args.network, &args.config)?;
    match loaded.spec.arithmetic {
        Arithmetic::Exact => run_plan::<Rational>(args, mode, &loaded),
        Arithmetic::Float => run_plan::<f64>(args, mode, &loaded),
    }
}

fn insert_exact(report: &mut Value, key: &str, value: Option<Value>) {
    if let (Some(v), Value::Object(m)) = (value, report) {
        m.insert(key.to_string(), v);
    }
}

fn run_plan<S: Scalar>(args: &RunArgs, mode: Mode, loaded: &Loaded) -> Result<()> {
    let pipeline = Pipeline::<S>::from_spec(&loaded.spec, &loaded.network)?;
    let out = pipeline.output_stage();
    let d = pipeline.input_distribution();
    let mut report = json!({
        "arithmetic": loaded.spec.arithmetic,
        "config_hash": loaded.hash,
        "input": {
            "states": pipeline.input_space().len(),
            "cells": pipeline.input_partition().cell_count(),
        },
    });
    let plot_dir = args.out.join("plot");

    if matches!(mode, Mode::Analyze | Mode::Compare) {
        let run = pipeline.run_from(d)?;
        write(
            &args.out,
            "abstract_input.csv",
            &distribution_to_csv(&run.abstract_input),
        )?;
        let mut stages = Vec::new();
        for (i, (stage, (dist, t))) in pipeline
            .stages()
            .iter()
            .zip(run.stages.iter().zip(&run.transformers))
            .enumerate()
        {
            let n = i + 1;
            write(
                &args.out,
                &format!("stage_{n}.csv"),
                &distribution_to_csv(dist),
            )?;
            if args.emit_plot_data {
                let title = format!(
                    "stage {n}, layers {}..{}",
                    stage.layers.start, stage.layers.end
                );
                write(
                    &plot_dir,
                    &format!("stage_{n}.dat"),
                    &plot_table(dist, &stage.partition, &title),
                )?;
            }
            let mut entry = json!({
                "stage": n,
                "layers": [stage.layers.start, stage.layers.end],
                "states": stage.space.len(),
                "cells": stage.partition.cell_count(),
                "empty_cells": stage.partition.empty_cells().len(),
                "provenance": t.provenance(),
                "abstract": cell_map(dist, &stage.partition),
            });
            insert_exact(
                &mut entry,
                "abstract_exact",
                exact_cell_map(dist, &stage.partition),
            );
            stages.push(entry);
        }
        if args.emit_plot_data {
            write(
                &plot_dir,
                "input.dat",
                &plot_table(
                    &run.abstract_input,
                    pipeline.input_partition(),
                    "abstract input",
                ),
            )?;
        }
        report["input"]["abstract"] = cell_map(&run.abstract_input, pipeline.input_partition());
        report["stages"] = Value::Array(stages);
        report["abstract"] = cell_map(run.output(), &out.partition);
        insert_exact(
            &mut report,
            "abstract_exact",
            exact_cell_map(run.output(), &out.partition),
        );
    }

    if matches!(mode, Mode::Oracle | Mode::Compare) {
        let budget = loaded.spec.oracle_budget;
        let pushed = brute_force_push(&pipeline.prefix()?, d, pipeline.input_space(), budget)?;
        let concrete = pushed.onto(&out.space)?;
        write(
            &args.out,
            "oracle_output.csv",
            &distribution_to_csv(&concrete),
        )?;
        let oracle = build_A(&out.partition)?.apply(&concrete)?;
        write(&args.out, "oracle.csv", &distribution_to_csv(&oracle))?;
        if args.emit_plot_data {
            write(
                &plot_dir,
                "oracle.dat",
                &plot_table(&oracle, &out.partition, "oracle"),
            )?;
        }
        report["evaluations"] = json!(pushed.evaluations);
        report["distinct_outputs"] = json!(pushed.points.len());
        report["oracle"] = cell_map(&oracle, &out.partition);
        insert_exact(
            &mut report,
            "oracle_exact",
            exact_cell_map(&oracle, &out.partition),
        );
    }

    if let Mode::Compare = mode {
        let cmp = compare_abstract(&pipeline, d, loaded.spec.oracle_budget)?;
        let gap = pipeline.precision_gap(d)?;
        report["tv"] = number(cmp.tv.to_f64());
        insert_exact(&mut report, "tv_exact", exact_number(&cmp.tv));
        report["cells"] = Value::Array(
            cmp.cells
                .iter()
                .map(|c| {
                    json!({
                        "cell": c.label,
                        "oracle": number(c.oracle.to_f64()),
                        "abstract": number(c.composed.to_f64()),
                        "delta": number((c.composed.clone() - c.oracle.clone()).to_f64()),
                    })
                })
                .collect(),
        );
        report["direct"] = cell_map(&gap.direct, &out.partition);
        report["precision_gap_tv"] = number(gap.tv.to_f64());
    }

    let name = match mode {
        Mode::Analyze => "analyze",
        Mode::Oracle => "oracle",
        Mode::Compare => "compare",
    };
    report["command"] = json!(name);
    write_json(&args.out, "report.json", &report)?;
    println!("{}", args.out.join("report.json").display());
    Ok(())
}

fn lift(args: &LiftArgs) -> Result<()> {
    let loaded = load(&args.network, &args.config)?;
    match loaded.spec.arithmetic {
        Arithmetic::Exact => lift_with::<Rational>(args, &loaded),
        Arithmetic::Float => lift_with::<f64>(args, &loaded),
    }
}

fn lift_with<S: Scalar>(args: &LiftArgs, loaded: &Loaded) -> Result<()> {
    let pipeline = Pipeline::<S>::from_spec(&loaded.spec, &loaded.network)?;
    let dir = &args.dump_ops;
    write(
        dir,
        "input_partition.csv",
        &pipeline.input_partition().to_csv(),
    )?;
    let transformers = pipeline.transformers()?;
    let mut prev_space = pipeline.input_space();
    let mut prev_partition = pipeline.input_partition();
    let mut written = Vec::new();
    for (i, (stage, t)) in pipeline.stages().iter().zip(&transformers).enumerate() {
        let n = i + 1;
        let mut files = vec![
            (format!("stage_{n}_partition.csv"), stage.partition.to_csv()),
            (
                format!("stage_{n}_G.csv"),
                operator_to_csv(&build_G::<S>(prev_partition)?),
            ),
            (
                format!("stage_{n}_A.csv"),
                operator_to_csv(&build_A::<S>(&stage.partition)?),
            ),
            (format!("stage_{n}_T.csv"), operator_to_csv(t.operator())),
            (
                format!("stage_{n}_T.json"),
                format!("{}\n", t.provenance().sidecar_json()),
            ),
        ];
        if stage.relu == pai_core::analysis::ReluMode::Lifted {
            let slice = pipeline.network().slice(stage.layers.clone())?;
            let f = lift_function(|x: &[S]| slice.eval(x), prev_space, &stage.space)?;
            files.push((format!("stage_{n}_F.csv"), operator_to_csv(&f)));
        }
        for (name, text) in files {
            write(dir, &name, &text)?;
            written.push(name);
        }
        prev_space = &stage.space;
        prev_partition = &stage.partition;
    }
    written.sort();
    for name in written {
        println!("{}", dir.join(name).display());
    }
    Ok(())
}

fn zonotope(args: &ZonotopeArgs) -> Result<()> {
    let mut z = Zonotope::from_json(&read(&args.spec)?)?;
    let step = parse_decimal(&args.lattice)?;
    if let Some(path) = &args.network {
        let net = load_network(&read(path)?)?.to_exact()?;
        for (t, layer) in net.layers().iter().enumerate() {
            let Layer::Dense(dense) = layer else {
                return Err(Error::Config(format!(
                    "layer {t} is a {}; zonotope images are taken through dense layers only",
                    layer.kind()
                )));
            };
            z = z.affine_image(&dense.weights, &dense.bias)?;
        }
    }
    let points = z.lattice_points(step)?;
    if let Some(path) = &args.dump {
        let mut text = String::from("x,y\n");
        for p in &points {
            text.push_str(&format!(
                "{},{}\n",
                format_decimal(&p[0]),
                format_decimal(&p[1])
            ));
        }
        fs::write(path, text)?;
    }
    if args.count {
        println!("{}", points.len());
    } else {
        for p in &points {
            println!("{} {}", format_decimal(&p[0]), format_decimal(&p[1]));
        }
    }
    Ok(())
}

fn mnist(args: &MnistArgs) -> Result<()> {
    let cfg_bytes = read(&args.config)?;
    let cfg = ImageAbstractionConfig::from_json(&cfg_bytes)?;
    let file = fs::File::open(&args.csv)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.csv.display())))?;
    let mut data = read_mnist_csv(std::io::BufReader::new(file))?;
    if let Some(n) = args.limit {
        data.images.truncate(n);
        data.labels.truncate(n);
    }
    if data.is_empty() {
        return Err(Error::Config("the image CSV has no rows".into()));
    }
    let (net, net_bytes) = match &args.network {
        Some(path) => {
            let bytes = read(path)?;
            (load_network(&bytes)?, bytes)
        }
        None => {
            let classes = data.labels.iter().max().map_or(1, |m| usize::from(*m) + 1);
            let net = fit_centroid_classifier(&data, &cfg, classes)?;
            let text = format!("{}\n", net.to_json());
            write(&args.out, "network.json", &text)?;
            (net, text.into_bytes())
        }
    };
    let d = init_distribution::<f64>(data.images.iter().map(Vec::as_slice), &cfg)?;
    let analysis = analyze_classifier(&net, &d, &cfg, args.samples, args.seed)?;

    let mut top: Vec<(usize, f64)> = d.iter().map(|(c, p)| (c, *p)).collect();
    top.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let label = |c: usize| format!("{c:0width$b}", width = cfg.groups());
    let classes: serde_json::Map<String, Value> = analysis
        .classes
        .to_dense()
        .iter()
        .enumerate()
        .map(|(c, p)| (c.to_string(), number(*p)))
        .collect();
    let report = json!({
        "command": "mnist",
        "config": cfg,
        "config_hash": config_hash(&net_bytes, &cfg_bytes),
        "seed": args.seed,
        "samples": args.samples,
        "images": data.len(),
        "cells": cfg.cell_count(),
        "support_size": d.support_len(),
        "provenance": analysis.provenance,
        "top_cells": top.iter().take(5).map(|(c, p)| json!({"cell": label(*c), "mass": number(*p)})).collect::<Vec<_>>(),
        "classes": classes,
        "contributions": analysis.contributions.iter().map(|cc| json!({
            "cell": cc.label,
            "mass": number(cc.mass),
            "classes": cc.classes.iter().map(|v| number(*v)).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "block_effects": analysis.block_effects.iter().map(|b| json!({
            "block": b.block,
            "mass": number(b.mass),
            "classes": b.classes.iter().map(|v| number(*v)).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    });
    write(&args.out, "cells.csv", &distribution_to_csv(&d))?;
    write(
        &args.out,
        "classes.csv",
        &distribution_to_csv(&analysis.classes),
    )?;
    write_json(&args.out, "report.json", &report)?;
    println!("{}", args.out.join("report.json").display());
    Ok(())
}

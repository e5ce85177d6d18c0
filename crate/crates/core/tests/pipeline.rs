use std::path::{Path, PathBuf};

use idopt::case::{resolve_constraints, CaseConfig, InitSpec, ModelRef};
use idopt::dataset::{load_csv, preprocess, titanic_columns};
use idopt::models::{density_weighted, BlackBox, Model};
use idopt::optimizer::run;
use idopt::pipeline::{fit_density, train_model, ModelKind};
use idopt::{BoxDomain, DimKind, ObjectiveMode, OptimizerConfig};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn titanic() -> idopt::dataset::TabularData {
    load_csv(root().join("data/titanic3.csv"), &titanic_columns(), "survived").unwrap()
}

#[test]
fn titanic_encodes_to_twelve_dims() {
    let data = titanic();
    assert_eq!(data.len(), 1309);
    let (train, test) = preprocess(&data, 0.8, 1).unwrap();
    assert_eq!(train.len() + test.len(), 1309);
    assert_eq!(train.len(), 1047);
    let schema = &train.schema;
    assert_eq!(schema.dim(), 12);
    assert_eq!(schema.group_names, vec!["sex", "pclass", "embarked"]);
    assert_eq!(schema.groups.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 3, 3]);
    for row in train.features.iter().chain(&test.features) {
        assert!(row.iter().all(|v| v.is_finite()));
        for g in &schema.groups {
            assert_eq!(g.iter().map(|&i| row[i]).sum::<f64>(), 1.0);
        }
    }
    for i in schema.numeric_dims() {
        let n = train.len() as f64;
        let mean = train.features.iter().map(|r| r[i]).sum::<f64>() / n;
        let var = train.features.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-9 && (var.sqrt() - 1.0).abs() < 1e-9, "{}", schema.dims[i].name);
    }
}

#[test]
fn density_is_positive_on_its_own_rows() {
    let file = fit_density(&titanic(), 0.2, 0.8, 3).unwrap();
    assert_eq!(file.density.support.len(), 1309);
    assert_eq!(file.schema.dim(), 12);
    for row in file.density.support.iter().step_by(97) {
        assert!(file.density.density(row) > 0.0);
    }
}

#[test]
fn models_stay_in_unit_interval() {
    let data = titanic();
    for kind in [ModelKind::Mlp, ModelKind::Forest] {
        let file = train_model(&data, kind, 0.8, 5).unwrap();
        let m = file.metrics.unwrap();
        assert!(m.auc > 0.7 && m.accuracy > 0.7, "{kind:?}: {m:?}");
        let probe = BoxDomain::around(vec![0.0; 12], 4.0).unwrap();
        let mut x = vec![0.0; 12];
        for k in 0..200 {
            for (i, v) in x.iter_mut().enumerate() {
                *v = probe.lower(i) + ((k * 7 + i * 13) % 17) as f64 / 16.0 * 8.0;
            }
            let y = file.model.eval(&x);
            assert!((0.0..=1.0).contains(&y));
        }
    }
}

#[test]
fn checked_in_cases_parse_and_resolve() {
    let data = titanic();
    let schema = train_model(&data, ModelKind::Forest, 0.8, 1).unwrap().schema;
    for n in 1..=5 {
        let cfg = CaseConfig::load(&root().join(format!("cases/case{n}.json"))).unwrap();
        assert_eq!(cfg.optimizer.iterations, 300);
        assert!(matches!(cfg.model, ModelRef::File(_)));
        resolve_constraints(&schema, &cfg.constraints).unwrap();
    }
    let case5 = CaseConfig::load(&root().join("cases/case5.json")).unwrap();
    assert_eq!(case5.init, InitSpec::DataRow { index: 0, sigma: 0.1 });
    assert!(case5.density.is_some());
}

#[test]
fn data_row_start_is_the_first_record() {
    let data = titanic();
    let file = train_model(&data, ModelKind::Mlp, 0.8, 2).unwrap();
    let density = fit_density(&data, 0.2, 0.8, 2).unwrap();
    let row = density.density.support[0].clone();
    let weighted = density_weighted(file.model.clone(), density.density).unwrap();
    let cfg = OptimizerConfig { iterations: 3, sample_count: 80, learning_rate: 0.2, ..Default::default() };
    let init = BoxDomain::around(row.clone(), 0.1).unwrap();
    let out = run(&weighted, &file.schema, &init, &cfg, &Default::default(), ObjectiveMode::Maximize).unwrap();
    assert_eq!(out.trajectory.records[0].centers, row);
    assert!(out.trajectory.records.iter().all(|r| r.objective.is_finite()));
    assert!(matches!(file.model, Model::Mlp(_)));
    assert_eq!(file.schema.dims.iter().filter(|d| matches!(d.kind, DimKind::OneHot(_))).count(), 8);
}

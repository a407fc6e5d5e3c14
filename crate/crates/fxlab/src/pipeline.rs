//! The four pipeline stages.
//!
//! The modelling panel has the target level (taken from the USA file) as
//! its first column, followed by the USA-minus-IND delta of every other
//! column. VAR works on the panel differenced once (or in levels when every
//! series is already stationary and the policy is `fail`). SVR and LSTM see
//! the min-max scaled panel in a one-lag supervised layout: row `t - 1` of
//! the scaled panel predicts the scaled target at `t`. Scaling is fitted on
//! the training rows only.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use fxlab_core::analysis::{correlation_matrix, tree_importance, CorrelationMatrix, ForestConfig, ImportanceReport};
use fxlab_core::data::{country_delta, difference, load_csv, minmax_fit, minmax_transform, ScalingParams, SplitSpec};
use fxlab_core::lstm::{self, LstmParams, SupervisedSequence, TrainConfig};
use fxlab_core::metrics::{evaluate, MetricsReport};
use fxlab_core::stattests::{
    adf_test, default_max_lag, durbin_watson, granger_matrix, AdfResult, DwResult, GrangerMatrix, RegressionKind,
    TestRecord,
};
use fxlab_core::svr::{fit_svr, grid_search, SvrModel};
use fxlab_core::var::{fit_var, rolling_one_step, select_lag_aic, VarModel};
use fxlab_core::TimeSeriesFrame;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{ModelKind, PipelineConfig, StationarityPolicy};
use crate::output::{read_json, write_json, write_text};
use crate::{runtime, CliError};

/// Loaded and transformed data shared by every stage.
pub struct Prepared {
    pub panel: TimeSeriesFrame,
    pub target: usize,
    /// Index of the first test row of `panel`.
    pub boundary: usize,
    pub adf_level: Vec<AdfResult>,
    pub adf_diff: Vec<AdfResult>,
    pub differenced: TimeSeriesFrame,
    pub scaling: ScalingParams,
    pub scaled: TimeSeriesFrame,
}

impl Prepared {
    pub fn n(&self) -> usize {
        self.panel.n_rows()
    }

    pub fn target_name(&self) -> &str {
        &self.panel.names()[self.target]
    }

    pub fn test_rows(&self) -> Range<usize> {
        self.boundary..self.n()
    }

    pub fn actual(&self) -> Vec<f64> {
        self.test_rows().map(|t| self.panel.get(t, self.target)).collect()
    }

    /// Feature rows of the supervised layout; row `i` predicts panel row `i + 1`.
    pub fn design_x(&self) -> Vec<Vec<f64>> {
        (0..self.n() - 1).map(|t| self.scaled.row(t).to_vec()).collect()
    }

    pub fn design_y(&self) -> Vec<f64> {
        (1..self.n()).map(|t| self.scaled.get(t, self.target)).collect()
    }

    pub fn design_names(&self) -> Vec<String> {
        self.panel.names().iter().map(|n| format!("{n}_lag1")).collect()
    }

    /// Design rows whose target lies in the training span.
    fn train_design(&self) -> Range<usize> {
        0..self.boundary - 1
    }

    fn test_design(&self) -> Range<usize> {
        self.boundary - 1..self.n() - 1
    }

    fn unscale_target(&self, scaled: &[f64]) -> Vec<f64> {
        scaled.iter().map(|&v| self.scaling.unscale(self.target, v)).collect()
    }

    /// Differencing order used for VAR under `policy`.
    pub fn modelling_order(&self, policy: StationarityPolicy) -> Result<usize, CliError> {
        let names = self.panel.names();
        match policy {
            StationarityPolicy::AutoDifference => {
                for (name, r) in names.iter().zip(&self.adf_diff) {
                    if !r.reject_unit_root {
                        warn!(
                            "{name} still has a unit root after differencing (ADF {:.3} vs {:.3}); using it anyway",
                            r.statistic, r.critical_5pct
                        );
                    }
                }
                Ok(1)
            }
            StationarityPolicy::Fail => {
                for (name, r) in names.iter().zip(&self.adf_level) {
                    if !r.reject_unit_root {
                        return Err(CliError::Runtime(format!(
                            "{name} has a unit root in levels (ADF {:.3} vs {:.3}) and the stationarity policy is fail",
                            r.statistic, r.critical_5pct
                        )));
                    }
                }
                Ok(0)
            }
        }
    }

    fn modelled(&self, order: usize) -> &TimeSeriesFrame {
        if order == 0 {
            &self.panel
        } else {
            &self.differenced
        }
    }
}

fn load_panel(config: &PipelineConfig) -> Result<TimeSeriesFrame, CliError> {
    let read = |path: &Path, expected: Option<&[&str]>| {
        load_csv(path, expected).map_err(|e| runtime(format!("reading {}", path.display()), e))
    };
    let usa = read(&config.usa_csv, None)?;
    let names: Vec<&str> = usa.names().iter().map(String::as_str).collect();
    let ind = read(&config.ind_csv, Some(&names))?;
    let target = usa
        .column_index(&config.target)
        .map_err(|e| runtime(format!("reading {}", config.usa_csv.display()), e))?;
    let delta = country_delta(&usa, &ind).map_err(|e| runtime("building country deltas", e))?;
    let mut columns = vec![(config.target.clone(), usa.column(target))];
    for (j, name) in delta.names().iter().enumerate() {
        if j != target {
            columns.push((name.clone(), delta.column(j)));
        }
    }
    TimeSeriesFrame::from_columns(usa.dates()[0], columns).map_err(|e| runtime("building panel", e))
}

pub fn prepare(config: &PipelineConfig) -> Result<Prepared, CliError> {
    let panel = load_panel(config)?;
    let n = panel.n_rows();
    let split = SplitSpec::new(config.train_fraction, n).map_err(|e| runtime("splitting", e))?;
    let boundary = split.boundary_index;
    if boundary < 3 || boundary >= n {
        return Err(CliError::Runtime(format!(
            "train fraction {} leaves {boundary} training and {} test rows",
            config.train_fraction,
            n - boundary
        )));
    }

    let mut adf_level = Vec::new();
    let mut adf_diff = Vec::new();
    let mut diff_columns = Vec::new();
    for (j, name) in panel.names().iter().enumerate() {
        let level = panel.column(j);
        let diffed = difference(&level, 1).map_err(|e| runtime(name, e))?;
        let adf = |series: &[f64], label: &str| {
            adf_test(series, default_max_lag(series.len()), RegressionKind::Constant)
                .map_err(|e| runtime(format!("ADF test on {label}"), e))
        };
        adf_level.push(adf(&level, name)?);
        adf_diff.push(adf(&diffed, &format!("differenced {name}"))?);
        diff_columns.push((name.clone(), diffed));
    }
    let differenced =
        TimeSeriesFrame::from_columns(panel.dates()[1], diff_columns).map_err(|e| runtime("differencing", e))?;

    let scaling = minmax_fit(&panel, &split).map_err(|e| runtime("scaling", e))?;
    let scaled = minmax_transform(&panel, &scaling).map_err(|e| runtime("scaling", e))?;
    Ok(Prepared {
        panel,
        target: 0,
        boundary,
        adf_level,
        adf_diff,
        differenced,
        scaling,
        scaled,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct AdfEntry {
    series: String,
    differenced: bool,
    #[serde(flatten)]
    result: AdfResult,
}

#[derive(Debug, Serialize, Deserialize)]
struct DwEntry {
    series: String,
    #[serde(flatten)]
    result: DwResult,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeatureReport {
    pub correlation: CorrelationMatrix,
    pub importance: ImportanceReport,
}

fn records_csv(records: &[TestRecord]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("test,series,statistic,critical_5pct,p_value,decision\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.test,
            r.series,
            r.statistic,
            opt(r.critical_5pct),
            opt(r.p_value),
            r.decision
        ));
    }
    out
}

fn grid_csv(table: &[fxlab_core::svr::CvCell]) -> String {
    let mut out = String::from("c,gamma,epsilon,mean_rmse,fold_rmse,error\n");
    for cell in table {
        let folds: Vec<String> = cell.fold_rmse.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            cell.config.c,
            cell.config.gamma,
            cell.config.epsilon,
            cell.mean_rmse.map(|v| v.to_string()).unwrap_or_default(),
            folds.join(";"),
            cell.error.as_deref().unwrap_or("").replace(',', ";"),
        ));
    }
    out
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, seed: u64) -> Result<Self, CliError> {
        config.validate()?;
        let out_dir = config.output_dir.clone();
        Ok(Self { config, seed, out_dir })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn ensure_out_dir(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| runtime(format!("cannot create {}", self.out_dir.display()), e))
    }

    /// VAR lag: the configured one, or the AIC choice on the training rows.
    fn var_lag(&self, train: &TimeSeriesFrame) -> Result<usize, CliError> {
        match self.config.var.lag {
            Some(lag) => Ok(lag),
            None => select_lag_aic(train, self.config.var.max_lag).map_err(|e| runtime("VAR lag selection", e)),
        }
    }

    fn var_train_frame(&self, prep: &Prepared, order: usize) -> Result<TimeSeriesFrame, CliError> {
        prep.modelled(order)
            .slice_rows(0..prep.boundary - order)
            .map_err(|e| runtime("VAR training rows", e))
    }

    pub fn cmd_tests(&self) -> Result<(), CliError> {
        let prep = prepare(&self.config)?;
        self.tests_stage(&prep)
    }

    fn tests_stage(&self, prep: &Prepared) -> Result<(), CliError> {
        self.ensure_out_dir()?;
        let names = prep.panel.names();
        let mut adf = Vec::new();
        let mut adf_records = Vec::new();
        for (j, name) in names.iter().enumerate() {
            for (differenced, result) in [(false, &prep.adf_level[j]), (true, &prep.adf_diff[j])] {
                let label = if differenced {
                    format!("diff({name})")
                } else {
                    name.clone()
                };
                adf_records.push(result.record(&label));
                adf.push(AdfEntry {
                    series: name.clone(),
                    differenced,
                    result: result.clone(),
                });
            }
        }
        write_json(&self.path("adf.json"), &adf)?;
        write_text(&self.path("adf.csv"), &records_csv(&adf_records))?;

        let train = self.var_train_frame(prep, 1)?;
        let lag = self.var_lag(&train)?;
        let granger: GrangerMatrix = granger_matrix(&prep.differenced, lag).map_err(|e| runtime("Granger tests", e))?;
        let granger_records: Vec<TestRecord> = granger.iter().map(|r| r.record()).collect();
        write_json(&self.path("granger.json"), &granger)?;
        write_text(&self.path("granger.csv"), &records_csv(&granger_records))?;

        let model = fit_var(&train, lag).map_err(|e| runtime("VAR fit for residual diagnostics", e))?;
        let mut dw = Vec::new();
        let mut dw_records = Vec::new();
        for (j, name) in names.iter().enumerate() {
            let residuals: Vec<f64> = model.residuals.iter().map(|r| r[j]).collect();
            let result = durbin_watson(&residuals).map_err(|e| runtime(format!("Durbin-Watson on {name}"), e))?;
            dw_records.push(result.record(name));
            dw.push(DwEntry {
                series: name.clone(),
                result,
            });
        }
        write_json(&self.path("dw.json"), &dw)?;
        write_text(&self.path("dw.csv"), &records_csv(&dw_records))?;
        info!("wrote test reports to {}", self.out_dir.display());
        Ok(())
    }

    pub fn cmd_fit(&self, model: ModelKind) -> Result<(), CliError> {
        let prep = prepare(&self.config)?;
        self.fit_stage(&prep, model)
    }

    fn fit_stage(&self, prep: &Prepared, model: ModelKind) -> Result<(), CliError> {
        self.ensure_out_dir()?;
        match model {
            ModelKind::Var => {
                let order = prep.modelling_order(self.config.stationarity)?;
                let train = self.var_train_frame(prep, order)?;
                let lag = self.var_lag(&train)?;
                let fitted = fit_var(&train, lag).map_err(|e| runtime("VAR fit", e))?;
                info!("VAR({lag}) spectral radius {:.4}", fitted.spectral_radius());
                write_json(&self.path("var.json"), &fitted)?;
            }
            ModelKind::Svr => {
                let x = prep.design_x();
                let y = prep.design_y();
                let rows = prep.train_design();
                let (x, y) = (&x[rows.clone()], &y[rows]);
                let mut config = self.config.svr.config();
                if let Some(grid) = self.config.svr.grid_configs() {
                    let folds = self.config.svr.grid.as_ref().map_or(3, |g| g.folds);
                    let (best, table) = grid_search(x, y, &grid, folds).map_err(|e| runtime("SVR grid search", e))?;
                    write_text(&self.path("grid_cv.csv"), &grid_csv(&table))?;
                    info!(
                        "SVR grid search picked C={} gamma={} epsilon={}",
                        best.c, best.gamma, best.epsilon
                    );
                    config = best;
                }
                let fitted = fit_svr(x, y, &config).map_err(|e| runtime("SVR fit", e))?;
                info!(
                    "SVR fit: {} support vectors after {} iterations",
                    fitted.dual_coefs.len(),
                    fitted.iterations
                );
                write_json(&self.path("svr.json"), &fitted)?;
            }
            ModelKind::Lstm => {
                let (params, history) = self.train_lstm(prep)?;
                write_json(&self.path("lstm.json"), &params)?;
                write_text(&self.path("loss_history.csv"), &lstm::loss_history_csv(&history))?;
            }
        }
        Ok(())
    }

    fn train_lstm(&self, prep: &Prepared) -> Result<(LstmParams, Vec<lstm::EpochLoss>), CliError> {
        let s = &self.config.lstm;
        if s.hidden_dim == 0 {
            return Err(CliError::Runtime("lstm.hidden_dim must be positive".into()));
        }
        let train = TrainConfig {
            learning_rate: s.learning_rate,
            epochs: s.epochs,
            clip_norm: s.clip_norm,
            seed: self.seed,
            patience: s.patience,
        };
        train.validate().map_err(|e| runtime("LSTM", e))?;
        let rows = prep.train_design().len();
        let val_len = (rows as f64 * s.validation_fraction).round() as usize;
        if !(s.validation_fraction > 0.0 && s.validation_fraction < 1.0) || val_len == 0 || val_len >= rows {
            return Err(CliError::Runtime(format!(
                "lstm.validation_fraction {} does not split {rows} training rows",
                s.validation_fraction
            )));
        }
        let x = prep.design_x();
        let y = prep.design_y();
        let fit_end = rows - val_len;
        let seq = |r: Range<usize>| {
            SupervisedSequence::new(x[r.clone()].to_vec(), y[r].to_vec()).map_err(|e| runtime("LSTM sequence", e))
        };
        let mut initial = LstmParams::initialize(x[0].len(), s.hidden_dim, self.seed);
        initial.output_peephole = s.output_peephole;
        let outcome = lstm::train(&initial, &seq(0..fit_end)?, &seq(fit_end..rows)?, &train)
            .map_err(|e| runtime("LSTM training", e))?;
        info!(
            "LSTM trained for {} epochs, best validation loss at epoch {}",
            outcome.history.len(),
            outcome.best_epoch
        );
        Ok((outcome.params, outcome.history))
    }

    fn model_file<T: serde::de::DeserializeOwned>(&self, model: ModelKind) -> Result<T, CliError> {
        let path = self.path(&format!("{}.json", model.name()));
        if !path.exists() {
            return Err(CliError::Runtime(format!(
                "missing model file {}; run `fxlab fit {}` first",
                path.display(),
                model.name()
            )));
        }
        read_json(&path)
    }

    /// Level forecasts of the target over the test rows.
    fn predictions(&self, prep: &Prepared, model: ModelKind) -> Result<Vec<f64>, CliError> {
        match model {
            ModelKind::Var => {
                let fitted: VarModel = self.model_file(model)?;
                let order = prep.modelling_order(self.config.stationarity)?;
                let frame = prep.modelled(order);
                let anchors: Vec<f64> = prep
                    .test_rows()
                    .map(|t| {
                        if order == 0 {
                            0.0
                        } else {
                            prep.panel.get(t - 1, prep.target)
                        }
                    })
                    .collect();
                let range = prep.boundary - order..prep.n() - order;
                rolling_one_step(&fitted, frame, range, prep.target_name(), &anchors)
                    .map_err(|e| runtime("VAR forecast", e))
            }
            ModelKind::Svr => {
                let fitted: SvrModel = self.model_file(model)?;
                let x = prep.design_x();
                let scaled = fitted
                    .predict_many(&x[prep.test_design()])
                    .map_err(|e| runtime("SVR forecast", e))?;
                Ok(prep.unscale_target(&scaled))
            }
            ModelKind::Lstm => {
                let params: LstmParams = self.model_file(model)?;
                // Run over the whole history so the state at the test rows is warm.
                let all = lstm::predict(&params, &prep.design_x()).map_err(|e| runtime("LSTM forecast", e))?;
                Ok(prep.unscale_target(&all[prep.test_design()]))
            }
        }
    }

    pub fn cmd_evaluate(&self) -> Result<BTreeMap<String, MetricsReport>, CliError> {
        let prep = prepare(&self.config)?;
        self.evaluate_stage(&prep)
    }

    fn evaluate_stage(&self, prep: &Prepared) -> Result<BTreeMap<String, MetricsReport>, CliError> {
        self.ensure_out_dir()?;
        let actual = prep.actual();
        let mut report = BTreeMap::new();
        let mut columns = vec![("actual".to_string(), actual.clone())];
        for model in self.config.selected_models() {
            let pred = self.predictions(prep, model)?;
            let metrics = evaluate(&pred, &actual).map_err(|e| runtime(format!("scoring {}", model.name()), e))?;
            report.insert(model.name().to_string(), metrics);
            columns.push((model.name().to_string(), pred));
        }
        write_json(&self.path("report.json"), &report)?;
        let table = TimeSeriesFrame::from_columns(prep.panel.dates()[prep.boundary], columns)
            .map_err(|e| runtime("predictions table", e))?;
        write_text(&self.path("predictions.csv"), &table.to_csv_string())?;

        let correlation = correlation_matrix(&prep.panel).map_err(|e| runtime("correlation matrix", e))?;
        let x = prep.design_x();
        let y = prep.design_y();
        let forest = ForestConfig {
            trees: self.config.importance.trees,
            max_depth: self.config.importance.max_depth,
            seed: self.seed,
        };
        let rows = prep.train_design();
        let importance = tree_importance(&prep.design_names(), &x[rows.clone()], &y[rows], &forest)
            .map_err(|e| runtime("feature importance", e))?;
        write_text(&self.path("correlation.csv"), &correlation.to_csv_string())?;
        write_text(&self.path("importance.csv"), &importance.to_csv_string())?;
        write_json(
            &self.path("features.json"),
            &FeatureReport {
                correlation,
                importance,
            },
        )?;
        Ok(report)
    }

    /// Tests, every selected fit, then evaluation.
    pub fn run(&self) -> Result<BTreeMap<String, MetricsReport>, CliError> {
        let prep = prepare(&self.config)?;
        self.tests_stage(&prep)?;
        for model in self.config.selected_models() {
            info!("fitting {}", model.name());
            self.fit_stage(&prep, model)?;
        }
        self.evaluate_stage(&prep)
    }
}

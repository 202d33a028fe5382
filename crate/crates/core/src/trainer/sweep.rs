use serde::{Deserialize, Serialize};

use super::train::{resolve_config, val_evaluator};
use super::{score_split, train_with, Dataset, TrainConfig, TrainError};
use crate::corpus::Split;
use crate::metrics::{build_report, EvalReport, ReportTable, Schema};
use crate::model::{AttentionKind, ModelConfig, RnnType};
use crate::rst::RelationVocab;

/// The axes a sweep varies; everything else comes from the base config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRow {
    pub rnn_type: RnnType,
    pub hidden_units: usize,
    #[serde(default)]
    pub bidirectional: bool,
    pub encoder_layers: usize,
    #[serde(default = "no_attention")]
    pub attention: AttentionKind,
}

fn no_attention() -> AttentionKind {
    AttentionKind::None
}

impl GridRow {
    pub fn apply(&self, base: &ModelConfig) -> ModelConfig {
        ModelConfig {
            rnn_type: self.rnn_type,
            hidden_units: self.hidden_units,
            bidirectional: self.bidirectional,
            encoder_layers: self.encoder_layers,
            attention: self.attention,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub name: String,
    pub rows: Vec<GridRow>,
}

const fn row(
    rnn_type: RnnType,
    hidden_units: usize,
    bidirectional: bool,
    encoder_layers: usize,
    attention: AttentionKind,
) -> GridRow {
    GridRow {
        rnn_type,
        hidden_units,
        bidirectional,
        encoder_layers,
        attention,
    }
}

/// `table1`: recurrent variants without attention. `table2`: attention
/// scorers and depth.
pub fn builtin_grid(name: &str) -> Option<SweepGrid> {
    use AttentionKind::*;
    use RnnType::*;
    let rows = match name {
        "table1" => vec![
            row(Lstm, 256, false, 1, None),
            row(Lstm, 512, false, 1, None),
            row(Lstm, 1024, true, 1, None),
            row(Lstm, 1024, false, 1, None),
            row(Lstm, 512, false, 2, None),
            row(Lstm, 512, false, 3, None),
            row(Lstm, 512, false, 4, None),
            row(Gru, 512, false, 1, None),
        ],
        "table2" => vec![
            row(Lstm, 512, false, 1, General),
            row(Lstm, 512, false, 1, Dot),
            row(Lstm, 512, false, 1, Concat),
            row(Lstm, 512, false, 2, General),
            row(Lstm, 512, false, 3, General),
        ],
        _ => return Option::None,
    };
    Some(SweepGrid {
        name: name.to_string(),
        rows,
    })
}

impl SweepGrid {
    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        let grid: SweepGrid =
            toml::from_str(text).map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
        if grid.rows.is_empty() {
            return Err(TrainError::InvalidConfig("grid has no rows".into()));
        }
        Ok(grid)
    }

    /// A built-in grid name, or else a TOML grid file.
    pub fn resolve(name_or_path: &str) -> Result<Self, TrainError> {
        match builtin_grid(name_or_path) {
            Some(g) => Ok(g),
            None if std::path::Path::new(name_or_path).is_file() => {
                Self::from_toml(&std::fs::read_to_string(name_or_path)?)
            }
            None => Err(TrainError::UnknownGrid(name_or_path.to_string())),
        }
    }

    pub fn schema(&self) -> Schema {
        if self.rows.iter().any(|r| r.attention != AttentionKind::None) {
            Schema::Attention
        } else {
            Schema::NoAttention
        }
    }
}

#[derive(Debug)]
pub struct SweepRowResult {
    pub row: GridRow,
    /// Test-split report of the row's best checkpoint.
    pub report: Result<EvalReport, TrainError>,
}

/// Trains every grid row with the shared training config and evaluates its
/// best checkpoint on the test split. A failing row is reported in place
/// without stopping the others.
pub fn sweep(
    grid: &SweepGrid,
    data: &Dataset,
    base: &ModelConfig,
    cfg: &TrainConfig,
    relations: &RelationVocab,
    on_row: &mut dyn FnMut(usize, &SweepRowResult),
) -> Vec<SweepRowResult> {
    let mut results = Vec::with_capacity(grid.rows.len());
    for (i, row) in grid.rows.iter().enumerate() {
        let result = SweepRowResult {
            row: *row,
            report: run_row(row, data, base, cfg, relations),
        };
        on_row(i, &result);
        results.push(result);
    }
    results
}

fn run_row(
    row: &GridRow,
    data: &Dataset,
    base: &ModelConfig,
    cfg: &TrainConfig,
    relations: &RelationVocab,
) -> Result<EvalReport, TrainError> {
    if data.test.is_empty() {
        return Err(TrainError::EmptySplit(Split::Test));
    }
    let config = resolve_config(data, &row.apply(base))?;
    let outcome = train_with(
        data,
        &config,
        cfg,
        &mut val_evaluator(data, relations),
        &mut |_| {},
    )?;
    let pairs = score_split(
        &outcome.checkpoint.params,
        &data.vocab,
        &data.test,
        relations,
    )?;
    Ok(build_report(&config, &pairs)?)
}

/// Successful rows as a table in the grid's schema.
pub fn sweep_table(grid: &SweepGrid, results: &[SweepRowResult]) -> ReportTable {
    let rows = results
        .iter()
        .filter_map(|r| r.report.as_ref().ok().cloned())
        .collect();
    ReportTable::with_schema(grid.schema(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_grids() {
        let t1 = builtin_grid("table1").unwrap();
        assert_eq!(t1.rows.len(), 8);
        assert_eq!(t1.schema(), Schema::NoAttention);
        assert_eq!(
            t1.rows[2],
            row(RnnType::Lstm, 1024, true, 1, AttentionKind::None)
        );
        assert_eq!(t1.rows[7].rnn_type, RnnType::Gru);
        let t2 = builtin_grid("table2").unwrap();
        assert_eq!(t2.rows.len(), 5);
        assert_eq!(t2.schema(), Schema::Attention);
        let kinds: Vec<_> = t2
            .rows
            .iter()
            .map(|r| (r.attention, r.encoder_layers))
            .collect();
        use AttentionKind::*;
        assert_eq!(
            kinds,
            vec![
                (General, 1),
                (Dot, 1),
                (Concat, 1),
                (General, 2),
                (General, 3)
            ]
        );
        assert!(builtin_grid("table3").is_none());
    }

    #[test]
    fn grid_from_toml() {
        let g = SweepGrid::from_toml(
            "[[rows]]\nrnn_type = \"GRU\"\nhidden_units = 32\nencoder_layers = 2\nattention = \"dot\"\n",
        )
        .unwrap();
        assert_eq!(
            g.rows,
            vec![row(RnnType::Gru, 32, false, 2, AttentionKind::Dot)]
        );
        assert!(SweepGrid::from_toml("rows = []").is_err());
        assert!(matches!(
            SweepGrid::resolve("no-such-grid"),
            Err(TrainError::UnknownGrid(_))
        ));
    }
}

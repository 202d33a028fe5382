use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{score_all, MetricsError, ScoredPair};
use crate::model::{AttentionKind, ModelConfig, RnnType};

pub const TABLE1_HEADER: &str =
    "RNN Type\t#Hidden Units\tBidirectional\t#Layers\tRelations\tEdges\tRelations+Edges\tBleu4";
pub const TABLE2_HEADER: &str =
    "RNN Type\t#Hidden Units\tBidirectional\t#Layers\t#Attention Type\tRelations\tEdges\tRelations+Edges\tBleu4";

/// One results row: the configuration axes plus the four metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rnn_type: RnnType,
    pub hidden_units: usize,
    pub bidirectional: bool,
    pub layers: usize,
    pub attention_type: Option<AttentionKind>,
    pub relations_acc: f64,
    pub edges_acc: f64,
    pub relations_edges_acc: f64,
    pub bleu4: f64,
}

pub fn build_report(
    config: &ModelConfig,
    pairs: &[ScoredPair],
) -> Result<EvalReport, MetricsError> {
    let scores = score_all(pairs)?;
    Ok(EvalReport {
        rnn_type: config.rnn_type,
        hidden_units: config.hidden_units,
        bidirectional: config.bidirectional,
        layers: config.encoder_layers,
        attention_type: (config.attention != AttentionKind::None).then_some(config.attention),
        relations_acc: scores.relations,
        edges_acc: scores.edges,
        relations_edges_acc: scores.relations_edges,
        bleu4: scores.bleu4,
    })
}

/// Column layout: without attention (first results table) or with an
/// attention-type column (second results table).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    NoAttention,
    Attention,
}

impl Schema {
    pub fn header(self) -> &'static str {
        match self {
            Schema::NoAttention => TABLE1_HEADER,
            Schema::Attention => TABLE2_HEADER,
        }
    }
}

impl EvalReport {
    /// Display cells; accuracies to 2 decimals, BLEU to 1.
    pub fn cells(&self, schema: Schema) -> Vec<String> {
        let mut cells = vec![
            self.rnn_type.to_string(),
            self.hidden_units.to_string(),
            if self.bidirectional { "YES" } else { "NO" }.to_string(),
            self.layers.to_string(),
        ];
        if schema == Schema::Attention {
            cells.push(
                self.attention_type
                    .unwrap_or(AttentionKind::None)
                    .to_string(),
            );
        }
        cells.push(format!("{:.2}", self.relations_acc));
        cells.push(format!("{:.2}", self.edges_acc));
        cells.push(format!("{:.2}", self.relations_edges_acc));
        cells.push(format!("{:.1}", self.bleu4));
        cells
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub schema: Schema,
    pub rows: Vec<EvalReport>,
}

impl ReportTable {
    /// Uses the attention schema when any row has an attention type.
    pub fn new(rows: Vec<EvalReport>) -> Self {
        let schema = if rows.iter().any(|r| r.attention_type.is_some()) {
            Schema::Attention
        } else {
            Schema::NoAttention
        };
        ReportTable { schema, rows }
    }

    pub fn with_schema(schema: Schema, rows: Vec<EvalReport>) -> Self {
        ReportTable { schema, rows }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(self.schema.header());
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.cells(self.schema).join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn to_pretty(&self) -> String {
        let header: Vec<&str> = self.schema.header().split('\t').collect();
        let body: Vec<Vec<String>> = self.rows.iter().map(|r| r.cells(self.schema)).collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                body.iter()
                    .map(|r| r[c].len())
                    .chain([header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let rule: String = widths
            .iter()
            .map(|w| format!("+{}", "-".repeat(w + 2)))
            .collect::<String>()
            + "+\n";
        let line = |cells: &[&str]| {
            let mut s = String::new();
            for (c, w) in cells.iter().zip(&widths) {
                let _ = write!(s, "| {c:>w$} ");
            }
            s + "|\n"
        };
        let mut out = rule.clone();
        out += &line(&header);
        out += &rule;
        for r in &body {
            out += &line(&r.iter().map(String::as_str).collect::<Vec<_>>());
        }
        out + &rule
    }
}

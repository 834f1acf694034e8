use std::collections::HashMap;
use std::io::Read;

use super::{ClusterRegistry, MarkerGeneSet, MarkerType};
use crate::error::{Error, Result};

pub const DEFAULT_DEG_COUNT: usize = 20;

/// Mean expression per (gene, cluster), rows = genes, columns = clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    genes: Vec<String>,
    clusters: Vec<String>,
    cluster_index: HashMap<String, usize>,
    values: Vec<f64>,
}

impl ExpressionMatrix {
    pub fn new(genes: Vec<String>, clusters: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != genes.len() * clusters.len() {
            return Err(Error::Validation(format!(
                "expected {}x{} values, got {}",
                genes.len(),
                clusters.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Validation(format!("expression value {v} is not a finite non-negative number")));
        }
        let mut cluster_index = HashMap::with_capacity(clusters.len());
        for (i, c) in clusters.iter().enumerate() {
            if cluster_index.insert(c.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate cluster column {c}")));
            }
        }
        Ok(Self {
            genes,
            clusters,
            cluster_index,
            values,
        })
    }

    /// CSV with a header `gene,<cluster>,<cluster>,...` and one row per gene.
    pub fn from_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let clusters: Vec<String> = rdr.headers()?.iter().skip(1).map(String::from).collect();
        let mut genes = Vec::new();
        let mut values = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            if row.len() != clusters.len() + 1 {
                return Err(Error::parse(i + 2, format!("expected {} columns", clusters.len() + 1)));
            }
            genes.push(row[0].to_string());
            for cell in row.iter().skip(1) {
                values.push(
                    cell.parse::<f64>()
                        .map_err(|_| Error::parse(i + 2, format!("not a number: {cell:?}")))?,
                );
            }
        }
        Self::new(genes, clusters, values)
    }

    pub fn genes(&self) -> &[String] {
        &self.genes
    }

    pub fn clusters(&self) -> &[String] {
        &self.clusters
    }

    pub fn has_cluster(&self, cluster: &str) -> bool {
        self.cluster_index.contains_key(cluster)
    }

    pub fn value(&self, gene: usize, cluster: usize) -> f64 {
        self.values[gene * self.clusters.len() + cluster]
    }
}

/// Ranks genes by one-vs-rest log2 fold change,
/// `log2((target_mean + 1) / (rest_mean + 1))`, with `rest_mean` the mean over
/// every other cluster. Ties go to the lexically smaller symbol.
pub fn top_k_degs(matrix: &ExpressionMatrix, target: &str, k: usize) -> Result<Vec<String>> {
    let n = matrix.clusters.len();
    if n < 2 {
        return Err(Error::Validation(
            "differential expression needs at least two clusters".into(),
        ));
    }
    let &t = matrix
        .cluster_index
        .get(target)
        .ok_or_else(|| Error::NotFound(format!("cluster {target} in expression matrix")))?;
    let mut scored: Vec<(f64, &str)> = matrix
        .genes
        .iter()
        .enumerate()
        .map(|(g, sym)| {
            let row = &matrix.values[g * n..(g + 1) * n];
            let rest = (row.iter().sum::<f64>() - row[t]) / (n - 1) as f64;
            (((row[t] + 1.0) / (rest + 1.0)).log2(), sym.as_str())
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(scored.into_iter().take(k).map(|(_, s)| s.to_string()).collect())
}

/// Adds a Top-k DEG marker set to every cluster that appears in the matrix
/// and does not already have one. Returns the number of sets created.
pub fn generate_top_deg_sets(
    registry: &mut ClusterRegistry,
    matrix: &ExpressionMatrix,
    k: usize,
) -> Result<usize> {
    if matrix.clusters.len() < 2 {
        return Err(Error::Validation(
            "differential expression needs at least two clusters".into(),
        ));
    }
    let mut created = 0;
    for cluster in registry.clusters_mut() {
        if !matrix.has_cluster(&cluster.cluster_id) || cluster.marker_set(MarkerType::Top20Deg).is_some() {
            continue;
        }
        let genes = top_k_degs(matrix, &cluster.cluster_id, k)?;
        if genes.is_empty() {
            continue;
        }
        cluster.marker_sets.push(MarkerGeneSet::new(
            cluster.cluster_id.clone(),
            MarkerType::Top20Deg,
            genes,
        )?);
        cluster.marker_sets.sort_by_key(|s| s.marker_type);
        created += 1;
    }
    Ok(created)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(genes: &[&str], clusters: &[&str], values: &[f64]) -> ExpressionMatrix {
        ExpressionMatrix::new(
            genes.iter().map(|s| s.to_string()).collect(),
            clusters.iter().map(|s| s.to_string()).collect(),
            values.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn fold_change_sign() {
        let m = matrix(&["A", "B"], &["t", "o"], &[5.0, 1.0, 1.0, 5.0]);
        assert_eq!(top_k_degs(&m, "t", 1).unwrap(), vec!["A"]);
        assert_eq!(top_k_degs(&m, "o", 1).unwrap(), vec!["B"]);
        assert!(top_k_degs(&m, "t", 0).unwrap().is_empty());
    }

    #[test]
    fn ties_break_by_symbol() {
        let m = matrix(&["Zeb1", "Abca1"], &["t", "o"], &[2.0, 1.0, 2.0, 1.0]);
        assert_eq!(top_k_degs(&m, "t", 2).unwrap(), vec!["Abca1", "Zeb1"]);
    }

    #[test]
    fn single_cluster_is_an_error() {
        let m = matrix(&["A"], &["t"], &[1.0]);
        assert!(top_k_degs(&m, "t", 1).is_err());
    }

    #[test]
    fn csv_parsing() {
        let m = ExpressionMatrix::from_csv("gene,1,2\nA,1.5,0\nB,0,2\n".as_bytes()).unwrap();
        assert_eq!(m.clusters(), &["1", "2"]);
        assert_eq!(m.value(1, 1), 2.0);
        assert!(ExpressionMatrix::from_csv("gene,1,2\nA,x,0\n".as_bytes()).is_err());
        assert!(ExpressionMatrix::from_csv("gene,1,2\nA,-1,0\n".as_bytes()).is_err());
    }
}

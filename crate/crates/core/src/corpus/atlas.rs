use std::collections::{BTreeSet, HashMap};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{cluster_order, MarkerGeneSet, MarkerType};
use crate::error::{Error, Result};

/// One atlas cluster with its taxonomy, context and marker gene sets
/// (at most one per marker type).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCluster {
    pub cluster_id: String,
    pub class_label: String,
    pub subclass_label: String,
    pub supertype_label: String,
    pub nt_type_label: String,
    pub anatomical_location: String,
    pub marker_sets: Vec<MarkerGeneSet>,
}

impl CellCluster {
    pub fn marker_set(&self, marker_type: MarkerType) -> Option<&MarkerGeneSet> {
        self.marker_sets.iter().find(|s| s.marker_type == marker_type)
    }

    pub fn marker_types(&self) -> Vec<MarkerType> {
        self.marker_sets.iter().map(|s| s.marker_type).collect()
    }

    fn sort_sets(&mut self) {
        self.marker_sets.sort_by_key(|s| s.marker_type);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub classes: BTreeSet<String>,
    pub subclasses: BTreeSet<String>,
    pub supertypes: BTreeSet<String>,
}

/// Cluster and gene-set counts of a loaded atlas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleManifest {
    pub clusters: usize,
    pub cluster_combo: usize,
    pub merfish: usize,
    pub tf: usize,
    pub top20_deg: usize,
}

impl ScaleManifest {
    pub fn total_gene_sets(&self) -> usize {
        self.cluster_combo + self.merfish + self.tf + self.top20_deg
    }

    pub fn count(&self, marker_type: MarkerType) -> usize {
        match marker_type {
            MarkerType::ClusterCombo => self.cluster_combo,
            MarkerType::Merfish => self.merfish,
            MarkerType::Tf => self.tf,
            MarkerType::Top20Deg => self.top20_deg,
        }
    }
}

/// Counts of the full mouse whole-brain atlas run: three atlas-provided
/// marker sets per cluster plus Top-20 DEG sets for clusters with
/// expression support.
pub const ATLAS_SCALE: ScaleManifest = ScaleManifest {
    clusters: 5322,
    cluster_combo: 5322,
    merfish: 5322,
    tf: 5322,
    top20_deg: 5309,
};

#[derive(Debug, Clone, Default)]
pub struct ClusterRegistry {
    clusters: Vec<CellCluster>,
    index: HashMap<String, usize>,
}

impl ClusterRegistry {
    /// Builds a registry; duplicate cluster ids are an error.
    pub fn from_clusters(clusters: impl IntoIterator<Item = CellCluster>) -> Result<Self> {
        let mut list: Vec<CellCluster> = clusters.into_iter().collect();
        list.sort_by(|a, b| cluster_order(&a.cluster_id, &b.cluster_id));
        let mut index = HashMap::with_capacity(list.len());
        for (i, c) in list.iter_mut().enumerate() {
            c.sort_sets();
            if index.insert(c.cluster_id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate cluster id {}", c.cluster_id)));
            }
        }
        Ok(Self {
            clusters: list,
            index,
        })
    }

    pub fn get(&self, cluster_id: &str) -> Option<&CellCluster> {
        self.index.get(cluster_id).map(|&i| &self.clusters[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &CellCluster> {
        self.clusters.iter()
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn into_clusters(self) -> Vec<CellCluster> {
        self.clusters
    }

    pub fn taxonomy(&self) -> Taxonomy {
        let mut t = Taxonomy::default();
        for c in &self.clusters {
            t.classes.insert(c.class_label.clone());
            t.subclasses.insert(c.subclass_label.clone());
            t.supertypes.insert(c.supertype_label.clone());
        }
        t
    }

    pub fn manifest(&self) -> ScaleManifest {
        let count = |m: MarkerType| self.clusters.iter().filter(|c| c.marker_set(m).is_some()).count();
        ScaleManifest {
            clusters: self.clusters.len(),
            cluster_combo: count(MarkerType::ClusterCombo),
            merfish: count(MarkerType::Merfish),
            tf: count(MarkerType::Tf),
            top20_deg: count(MarkerType::Top20Deg),
        }
    }

    /// Adds a marker set to an existing cluster. A second set of the same
    /// type is rejected.
    pub fn attach(&mut self, set: MarkerGeneSet) -> Result<()> {
        let &i = self
            .index
            .get(&set.cluster_id)
            .ok_or_else(|| Error::Integrity(format!("unknown cluster {}", set.cluster_id)))?;
        let cluster = &mut self.clusters[i];
        if cluster.marker_set(set.marker_type).is_some() {
            return Err(Error::Validation(format!(
                "cluster {} already has a {} set",
                set.cluster_id, set.marker_type
            )));
        }
        cluster.marker_sets.push(set);
        cluster.sort_sets();
        Ok(())
    }

    /// Attaches marker sets from a long-format CSV with columns
    /// `cluster_id,marker_type,genes`.
    pub fn attach_markers_csv(&mut self, reader: impl Read) -> Result<usize> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = Headers::new(rdr.headers()?);
        let cid = headers.require(&["cluster_id", "cluster"])?;
        let mt = headers.require(&["marker_type"])?;
        let genes = headers.require(&["genes", "markers"])?;
        let mut n = 0;
        for row in rdr.records() {
            let row = row?;
            let marker_type: MarkerType = row.get(mt).unwrap_or("").parse()?;
            let list = split_genes(row.get(genes).unwrap_or(""));
            if list.is_empty() {
                continue;
            }
            self.attach(MarkerGeneSet::new(row.get(cid).unwrap_or(""), marker_type, list)?)?;
            n += 1;
        }
        Ok(n)
    }

    pub(crate) fn clusters_mut(&mut self) -> &mut [CellCluster] {
        &mut self.clusters
    }
}

struct Headers(Vec<String>);

impl Headers {
    fn new(h: &csv::StringRecord) -> Self {
        Self(h.iter().map(|s| s.trim().to_lowercase().replace([' ', '-'], "_")).collect())
    }

    fn find(&self, names: &[&str]) -> Option<usize> {
        names.iter().find_map(|n| self.0.iter().position(|h| h == n))
    }

    fn require(&self, names: &[&str]) -> Result<usize> {
        self.find(names)
            .ok_or_else(|| Error::Validation(format!("missing column {}", names[0])))
    }
}

fn split_genes(cell: &str) -> Vec<String> {
    cell.split([',', ';', '|', ' '])
        .map(str::trim)
        .filter(|g| !g.is_empty())
        .map(String::from)
        .collect()
}

/// Reads the atlas cluster table. Required columns: `cluster_id`, `class`,
/// `subclass`, `supertype`; optional: `nt_type`, `anatomical_location` and
/// one gene-list column per marker type (`cluster_combo`, `merfish`, `tf`,
/// `top20_deg`). A missing column or empty cell leaves that set absent.
pub fn ingest_atlas(reader: impl Read) -> Result<ClusterRegistry> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = Headers::new(rdr.headers()?);
    let cid = headers.require(&["cluster_id", "cluster", "cluster_alias"])?;
    let class = headers.require(&["class", "class_label"])?;
    let subclass = headers.require(&["subclass", "subclass_label"])?;
    let supertype = headers.require(&["supertype", "supertype_label"])?;
    let nt = headers.find(&["nt_type", "nt_type_label", "neurotransmitter"]);
    let loc = headers.find(&["anatomical_location", "anatomical_annotation", "location"]);
    let marker_cols: Vec<(MarkerType, usize)> = MarkerType::ALL
        .iter()
        .filter_map(|&m| headers.find(&[m.key()]).map(|i| (m, i)))
        .collect();

    let mut clusters = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let get = |idx: usize| row.get(idx).unwrap_or("").to_string();
        let cluster_id = get(cid);
        if cluster_id.is_empty() {
            return Err(Error::parse(i + 2, "empty cluster id"));
        }
        if !seen.insert(cluster_id.clone()) {
            return Err(Error::Validation(format!("duplicate cluster id {cluster_id}")));
        }
        let mut marker_sets = Vec::new();
        for &(m, idx) in &marker_cols {
            let genes = split_genes(&get(idx));
            if !genes.is_empty() {
                marker_sets.push(MarkerGeneSet::new(cluster_id.clone(), m, genes)?);
            }
        }
        clusters.push(CellCluster {
            class_label: get(class),
            subclass_label: get(subclass),
            supertype_label: get(supertype),
            nt_type_label: nt.map(get).unwrap_or_default(),
            anatomical_location: loc.map(get).unwrap_or_default(),
            cluster_id,
            marker_sets,
        });
    }
    ClusterRegistry::from_clusters(clusters)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ATLAS: &str = "cluster_id,class,subclass,supertype,nt_type,anatomical_location,cluster_combo,merfish,tf\n\
1,01 IT-ET Glut,001 CLA-EPd-CTX Car3 Glut,0001 CLA-EPd-CTX Car3 Glut_1,Glut,Claustrum,\"Car3,Nr4a2\",Car3 Synpr,Nr4a2\n\
2,09 CNU-LGE GABA,061 STR D1 Gaba,0256 STR D1 Gaba_1,GABA,Striatum,,Drd1;Tac1,Foxp1\n\
3,21 MB Dopa,215 SNc-VTA-RAmb Foxa1 Dopa,0908 SNc-VTA Foxa1 Dopa_1,Dopa,Substantia nigra,Slc6a3 Th,Th,Foxa1\n";

    #[test]
    fn three_cluster_fixture() {
        let reg = ingest_atlas(ATLAS.as_bytes()).unwrap();
        assert_eq!(reg.len(), 3);
        let m = reg.manifest();
        assert_eq!(m.total_gene_sets(), 8);
        assert_eq!(reg.get("2").unwrap().marker_sets.len(), 2);
        assert!(reg.get("2").unwrap().marker_set(MarkerType::ClusterCombo).is_none());
        assert_eq!(reg.get("1").unwrap().marker_set(MarkerType::ClusterCombo).unwrap().genes, vec!["Car3", "Nr4a2"]);
        assert_eq!(reg.taxonomy().classes.len(), 3);
    }

    #[test]
    fn missing_marker_column_leaves_set_absent() {
        let text = "cluster_id,class,subclass,supertype,tf\n7,a,b,c,Foxp1\n";
        let reg = ingest_atlas(text.as_bytes()).unwrap();
        assert_eq!(reg.get("7").unwrap().marker_types(), vec![MarkerType::Tf]);
        assert_eq!(reg.get("7").unwrap().nt_type_label, "");
    }

    #[test]
    fn duplicate_cluster_is_an_error() {
        let text = "cluster_id,class,subclass,supertype\n1,a,b,c\n1,a,b,c\n";
        assert!(matches!(ingest_atlas(text.as_bytes()), Err(Error::Validation(_))));
    }

    #[test]
    fn long_format_markers() {
        let mut reg = ingest_atlas("cluster_id,class,subclass,supertype\n1,a,b,c\n".as_bytes()).unwrap();
        let n = reg
            .attach_markers_csv("cluster_id,marker_type,genes\n1,TF,Foxp1 Foxp2\n1,MERFISH,\n".as_bytes())
            .unwrap();
        assert_eq!(n, 1);
        assert!(reg
            .attach_markers_csv("cluster_id,marker_type,genes\n9,TF,Foxp1\n".as_bytes())
            .is_err());
        assert!(reg
            .attach_markers_csv("cluster_id,marker_type,genes\n1,TF,Foxp1\n".as_bytes())
            .is_err());
    }

    #[test]
    fn paper_scale_arithmetic() {
        assert_eq!(3 * 5322 + 5309, 21275);
        assert_eq!(ATLAS_SCALE.total_gene_sets(), 21275);
    }
}

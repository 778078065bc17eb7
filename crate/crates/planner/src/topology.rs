//! WAN topology ingestion and the derived quantities every formulation
//! consumes: the propagation-delay matrix and the per-switch flow profile.

use std::collections::BTreeMap;
use std::io::BufRead;

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use crate::error::{PlannerError, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// A geographic node. Coordinates are optional at parse time; they are
/// required for the geodesic distance matrix but not for the hop-count
/// fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub label: String,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
}

/// A normalized node/link graph: ids contiguous in file-appearance order,
/// duplicate links collapsed, self-loops dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<Node>,
    /// Unordered pairs stored with the smaller id first, sorted.
    pub links: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyFormat {
    GraphMl,
    EdgeCsv,
}

impl std::str::FromStr for TopologyFormat {
    type Err = PlannerError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graphml" => Ok(TopologyFormat::GraphMl),
            "edge_csv" => Ok(TopologyFormat::EdgeCsv),
            other => Err(PlannerError::MalformedInput(format!(
                "unknown topology format {other:?}; expected graphml or edge_csv"
            ))),
        }
    }
}

impl Topology {
    /// Builds a normalized topology from labelled nodes and label pairs.
    /// Node order defines the 0..N-1 indices.
    pub fn from_parts(
        nodes: Vec<(String, Option<f64>, Option<f64>)>,
        links: Vec<(String, String)>,
    ) -> Result<Topology> {
        if nodes.is_empty() {
            return Err(PlannerError::EmptyTopology);
        }
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut out_nodes = Vec::with_capacity(nodes.len());
        for (label, latitude, longitude) in nodes {
            if index.contains_key(&label) {
                return Err(PlannerError::MalformedInput(format!(
                    "duplicate node label {label:?}"
                )));
            }
            let id = out_nodes.len();
            index.insert(label.clone(), id);
            out_nodes.push(Node {
                id,
                label,
                latitude,
                longitude,
            });
        }
        let mut out_links = Vec::new();
        for (a, b) in links {
            let ia = *index.get(&a).ok_or_else(|| {
                PlannerError::MalformedInput(format!("link endpoint {a:?} references no node"))
            })?;
            let ib = *index.get(&b).ok_or_else(|| {
                PlannerError::MalformedInput(format!("link endpoint {b:?} references no node"))
            })?;
            if ia == ib {
                continue; // self-loop
            }
            out_links.push((ia.min(ib), ia.max(ib)));
        }
        out_links.sort_unstable();
        out_links.dedup();
        Ok(Topology {
            nodes: out_nodes,
            links: out_links,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    /// Degree of each node.
    pub fn degrees(&self) -> Vec<u64> {
        let mut deg = vec![0u64; self.nodes.len()];
        for &(a, b) in &self.links {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Serializes to the edge_csv interchange format. Every node is emitted
    /// first as a `src`-only declaration row so that re-parsing reproduces the
    /// exact node order; link rows follow.
    pub fn to_edge_csv(&self) -> String {
        let fmt_coord = |c: Option<f64>| c.map(|v| format!("{v}")).unwrap_or_default();
        let mut out = String::from("src,dst,lat_src,lon_src,lat_dst,lon_dst\n");
        for node in &self.nodes {
            out.push_str(&format!(
                "{},,{},{},,\n",
                node.label,
                fmt_coord(node.latitude),
                fmt_coord(node.longitude)
            ));
        }
        for &(a, b) in &self.links {
            out.push_str(&format!(
                "{},{},,,,\n",
                self.nodes[a].label, self.nodes[b].label
            ));
        }
        out
    }
}

/// Parses a topology from a byte stream in the declared format.
pub fn parse_topology<R: BufRead>(source: R, format: TopologyFormat) -> Result<Topology> {
    match format {
        TopologyFormat::GraphMl => parse_graphml(source),
        TopologyFormat::EdgeCsv => parse_edge_csv(source),
    }
}

/// Reads a topology file, inferring the format from the extension unless one
/// is forced.
pub fn read_topology_file(
    path: &std::path::Path,
    format: Option<TopologyFormat>,
) -> Result<Topology> {
    let format = match format {
        Some(f) => f,
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("graphml") | Some("xml") => TopologyFormat::GraphMl,
            Some("csv") => TopologyFormat::EdgeCsv,
            other => {
                return Err(PlannerError::MalformedInput(format!(
                    "cannot infer topology format from extension {other:?}; pass --format"
                )))
            }
        },
    };
    let file = std::fs::File::open(path)?;
    parse_topology(std::io::BufReader::new(file), format)
}

fn parse_graphml<R: BufRead>(source: R) -> Result<Topology> {
    let mut reader = Reader::from_reader(source);
    reader.config_mut().trim_text(true);

    // Topology Zoo convention: <key id="dNN" for="node" attr.name="Latitude"/>
    // declares the attribute, node <data key="dNN"> carries the value. Some
    // files skip the declaration and key the data element by name directly;
    // both are accepted, matched case-insensitively.
    let mut lat_keys: Vec<String> = vec!["latitude".to_string()];
    let mut lon_keys: Vec<String> = vec!["longitude".to_string()];

    let mut nodes: Vec<(String, Option<f64>, Option<f64>)> = Vec::new();
    let mut links: Vec<(String, String)> = Vec::new();

    let mut cur_node: Option<usize> = None;
    let mut cur_data_key: Option<String> = None;
    let mut cur_text = String::new();
    let mut buf = Vec::new();

    let attr_value = |e: &quick_xml::events::BytesStart, name: &str| -> Result<Option<String>> {
        for attr in e.attributes() {
            let attr =
                attr.map_err(|err| PlannerError::MalformedInput(format!("bad attribute: {err}")))?;
            if attr.key.as_ref() == name.as_bytes() {
                let v = attr
                    .unescape_value()
                    .map_err(|err| PlannerError::MalformedInput(format!("bad attribute: {err}")))?;
                return Ok(Some(v.into_owned()));
            }
        }
        Ok(None)
    };

    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| PlannerError::MalformedInput(format!("graphml parse error: {e}")))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                match e.local_name().as_ref() {
                    b"key" => {
                        let id = attr_value(e, "id")?;
                        let name = attr_value(e, "attr.name")?;
                        if let (Some(id), Some(name)) = (id, name) {
                            match name.to_ascii_lowercase().as_str() {
                                "latitude" => lat_keys.push(id.to_ascii_lowercase()),
                                "longitude" => lon_keys.push(id.to_ascii_lowercase()),
                                _ => {}
                            }
                        }
                    }
                    b"node" => {
                        let id = attr_value(e, "id")?.ok_or_else(|| {
                            PlannerError::MalformedInput("node without id".into())
                        })?;
                        nodes.push((id, None, None));
                        if !is_empty {
                            cur_node = Some(nodes.len() - 1);
                        }
                    }
                    b"edge" => {
                        let src = attr_value(e, "source")?.ok_or_else(|| {
                            PlannerError::MalformedInput("edge without source".into())
                        })?;
                        let dst = attr_value(e, "target")?.ok_or_else(|| {
                            PlannerError::MalformedInput("edge without target".into())
                        })?;
                        links.push((src, dst));
                    }
                    b"data" if !is_empty => {
                        cur_data_key = attr_value(e, "key")?.map(|k| k.to_ascii_lowercase());
                        cur_text.clear();
                    }
                    _ => {}
                }
            }
            Event::Text(t) => {
                if cur_data_key.is_some() {
                    cur_text.push_str(&t.unescape().map_err(|e| {
                        PlannerError::MalformedInput(format!("graphml text error: {e}"))
                    })?);
                }
            }
            Event::End(ref e) => match e.local_name().as_ref() {
                b"node" => cur_node = None,
                b"data" => {
                    if let (Some(node_idx), Some(key)) = (cur_node, cur_data_key.take()) {
                        let value = cur_text.trim().parse::<f64>().ok();
                        if lat_keys.iter().any(|k| *k == key) {
                            nodes[node_idx].1 = value;
                        } else if lon_keys.iter().any(|k| *k == key) {
                            nodes[node_idx].2 = value;
                        }
                    }
                    cur_data_key = None;
                }
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }

    Topology::from_parts(nodes, links)
}

fn parse_edge_csv<R: BufRead>(source: R) -> Result<Topology> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| PlannerError::MalformedInput(format!("edge_csv header error: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (src_col, dst_col) = match (col("src"), col("dst")) {
        (Some(s), Some(d)) => (s, d),
        _ => {
            return Err(PlannerError::MalformedInput(
                "edge_csv requires at least `src,dst` header columns".into(),
            ))
        }
    };
    let coord_cols = (
        col("lat_src"),
        col("lon_src"),
        col("lat_dst"),
        col("lon_dst"),
    );

    let mut node_order: Vec<String> = Vec::new();
    let mut coords: BTreeMap<String, (Option<f64>, Option<f64>)> = BTreeMap::new();
    let mut links: Vec<(String, String)> = Vec::new();

    let parse_coord = |record: &csv::StringRecord, idx: Option<usize>| -> Result<Option<f64>> {
        match idx.and_then(|i| record.get(i)) {
            None | Some("") => Ok(None),
            Some(raw) => raw.parse::<f64>().map(Some).map_err(|_| {
                PlannerError::MalformedInput(format!("bad coordinate value {raw:?}"))
            }),
        }
    };

    for record in reader.records() {
        let record =
            record.map_err(|e| PlannerError::MalformedInput(format!("edge_csv error: {e}")))?;
        let src = record.get(src_col).unwrap_or("").to_string();
        if src.is_empty() {
            return Err(PlannerError::MalformedInput("empty src label".into()));
        }
        let dst = record.get(dst_col).unwrap_or("").to_string();
        let mut note = |label: &str, lat: Option<f64>, lon: Option<f64>| {
            let entry = coords.entry(label.to_string()).or_insert_with(|| {
                node_order.push(label.to_string());
                (None, None)
            });
            entry.0 = entry.0.or(lat);
            entry.1 = entry.1.or(lon);
        };
        note(
            &src,
            parse_coord(&record, coord_cols.0)?,
            parse_coord(&record, coord_cols.1)?,
        );
        if !dst.is_empty() {
            note(
                &dst,
                parse_coord(&record, coord_cols.2)?,
                parse_coord(&record, coord_cols.3)?,
            );
            links.push((src, dst));
        }
    }

    let nodes = node_order
        .into_iter()
        .map(|label| {
            let (lat, lon) = coords[&label];
            (label, lat, lon)
        })
        .collect();
    Topology::from_parts(nodes, links)
}

/// Symmetric nonnegative distance matrix in kilometers with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(n: usize) -> DistanceMatrix {
        DistanceMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Builds a symmetric matrix from an upper-triangle generator, so both
    /// halves come from the same computation.
    pub fn from_upper_triangle(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> DistanceMatrix {
        let mut m = DistanceMatrix::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j);
                m.data[i * n + j] = d;
                m.data[j * n + i] = d;
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sum over i of max over j of d[i][j]; the denominator of the lambda
    /// bound.
    pub fn sum_of_row_maxima(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| self.get(i, j))
                    .fold(0.0f64, |a, b| a.max(b))
            })
            .sum()
    }
}

/// Nonnegative integer flow counts per switch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowProfile(pub Vec<u64>);

impl FlowProfile {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

/// Great-circle distance in kilometers between two (lat, lon) points given in
/// degrees.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (phi1, phi2) = (lat1.to_radians(), lat2.to_radians());
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Great-circle distance matrix over the node coordinates. This is
/// coordinate-pair distance, not shortest-path distance along links, so
/// disconnected topologies are fine.
pub fn distance_matrix(t: &Topology) -> Result<DistanceMatrix> {
    let coords: Vec<(f64, f64)> = t
        .nodes
        .iter()
        .map(|node| match (node.latitude, node.longitude) {
            (Some(lat), Some(lon)) => Ok((lat, lon)),
            _ => Err(PlannerError::MissingCoordinates(node.label.clone())),
        })
        .collect::<Result<_>>()?;
    Ok(DistanceMatrix::from_upper_triangle(t.num_nodes(), |i, j| {
        let (la, lo) = coords[i];
        let (lb, lb2) = coords[j];
        haversine_km(la, lo, lb, lb2)
    }))
}

/// Hop-count shortest-path distance matrix (BFS), the fallback for
/// coordinate-free files. Unreachable pairs get distance N, one more than any
/// simple path.
pub fn hop_distance_matrix(t: &Topology) -> DistanceMatrix {
    let n = t.num_nodes();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &t.links {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut hops = vec![vec![n as u64; n]; n];
    for (start, row) in hops.iter_mut().enumerate() {
        row[start] = 0;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if row[v] == n as u64 {
                    row[v] = row[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    DistanceMatrix::from_upper_triangle(n, |i, j| hops[i][j] as f64)
}

/// Flow profile proportional to node degree: r[i] = degree of node i.
pub fn estimate_flows(t: &Topology) -> FlowProfile {
    FlowProfile(t.degrees())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny_graphml() -> &'static str {
        r#"<?xml version="1.0" encoding="utf-8"?>
<graphml xmlns="http://graphml.graphdrawing.org/xmlns">
  <key attr.name="Latitude" attr.type="double" for="node" id="d29"/>
  <key attr.name="Longitude" attr.type="double" for="node" id="d32"/>
  <graph edgedefault="undirected">
    <node id="0"><data key="d29">45.0</data><data key="d32">-93.0</data></node>
    <node id="1"><data key="d29">45.0</data><data key="d32">-93.0</data></node>
    <edge source="0" target="1"/>
    <edge source="1" target="0"/>
  </graph>
</graphml>"#
    }

    #[test]
    fn graphml_minimal_and_duplicate_edge_collapse() {
        let t = parse_topology(tiny_graphml().as_bytes(), TopologyFormat::GraphMl).unwrap();
        assert_eq!(t.num_nodes(), 2);
        assert_eq!(t.links, vec![(0, 1)]);
        assert_eq!(t.nodes[0].latitude, Some(45.0));
    }

    #[test]
    fn identical_coordinates_give_zero_distance() {
        let t = parse_topology(tiny_graphml().as_bytes(), TopologyFormat::GraphMl).unwrap();
        let d = distance_matrix(&t).unwrap();
        assert_eq!(d.get(0, 1), 0.0);
    }

    #[test]
    fn antipodal_distance_matches_half_circumference() {
        let d = haversine_km(0.0, 0.0, 0.0, 180.0);
        assert_abs_diff_eq!(d, std::f64::consts::PI * EARTH_RADIUS_KM, epsilon = 0.1);
    }

    #[test]
    fn empty_topology_rejected() {
        let csv = "src,dst\n";
        let err = parse_topology(csv.as_bytes(), TopologyFormat::EdgeCsv).unwrap_err();
        assert!(matches!(err, PlannerError::EmptyTopology));
    }

    #[test]
    fn edge_csv_with_coordinates_round_trips() {
        let csv = "src,dst,lat_src,lon_src,lat_dst,lon_dst\na,b,1.5,2.5,3.5,4.5\nb,c,3.5,4.5,5.5,6.5\n";
        let t = parse_topology(csv.as_bytes(), TopologyFormat::EdgeCsv).unwrap();
        assert_eq!(t.num_nodes(), 3);
        assert_eq!(t.nodes[0].label, "a");
        let rt =
            parse_topology(t.to_edge_csv().as_bytes(), TopologyFormat::EdgeCsv).unwrap();
        assert_eq!(rt, t);
    }

    #[test]
    fn unknown_link_endpoint_is_malformed() {
        let csv = "src,dst\na,b\n";
        let t = parse_topology(csv.as_bytes(), TopologyFormat::EdgeCsv).unwrap();
        assert_eq!(t.num_links(), 1);
        let err = Topology::from_parts(
            vec![("a".into(), None, None)],
            vec![("a".into(), "ghost".into())],
        )
        .unwrap_err();
        assert!(matches!(err, PlannerError::MalformedInput(_)));
    }

    #[test]
    fn degrees_sum_to_twice_links() {
        let csv = "src,dst\na,b\nb,c\nc,a\nc,d\n";
        let t = parse_topology(csv.as_bytes(), TopologyFormat::EdgeCsv).unwrap();
        let flows = estimate_flows(&t);
        assert_eq!(flows.total(), 2 * t.num_links() as u64);
    }

    #[test]
    fn complete_graph_k4_degrees() {
        let csv = "src,dst\na,b\na,c\na,d\nb,c\nb,d\nc,d\n";
        let t = parse_topology(csv.as_bytes(), TopologyFormat::EdgeCsv).unwrap();
        assert_eq!(estimate_flows(&t).0, vec![3, 3, 3, 3]);
    }

    #[test]
    fn missing_coordinates_error_names_the_node() {
        let csv = "src,dst,lat_src,lon_src,lat_dst,lon_dst\na,b,1.0,2.0,,\n";
        let t = parse_topology(csv.as_bytes(), TopologyFormat::EdgeCsv).unwrap();
        match distance_matrix(&t) {
            Err(PlannerError::MissingCoordinates(label)) => assert_eq!(label, "b"),
            other => panic!("expected MissingCoordinates, got {other:?}"),
        }
    }

    #[test]
    fn hop_matrix_counts_shortest_paths() {
        let csv = "src,dst\na,b\nb,c\nd,\n";
        let t = parse_topology(csv.as_bytes(), TopologyFormat::EdgeCsv).unwrap();
        let d = hop_distance_matrix(&t);
        assert_eq!(d.get(0, 2), 2.0);
        assert_eq!(d.get(0, 3), 4.0); // unreachable sentinel = n
        assert_eq!(d.get(3, 3), 0.0);
    }
}

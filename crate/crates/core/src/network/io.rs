//! Network serialization.
//!
//! Text form, one record per line, `#` starts a comment:
//!
//! ```text
//! network <vertex_count> root <root>
//! v <id> <measure> [coord ...]
//! e <u> <v> <conductance>
//! ```
//!
//! Every vertex must have exactly one `v` line. Floats are written in
//! shortest round-trip form so a write/read cycle is lossless. The JSON form
//! carries the same header, vertex and edge records.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::ResistanceNetwork;
use crate::error::{bail, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetworkFormat {
    Text,
    Json,
}

impl NetworkFormat {
    /// `.json` means JSON, anything else the text form.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::Json,
            _ => Self::Text,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct VertexRecord {
    id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<f64>>,
    measure: f64,
}

#[derive(Serialize, Deserialize)]
struct EdgeRecord {
    u: usize,
    v: usize,
    conductance: f64,
}

#[derive(Serialize, Deserialize)]
struct NetworkDocument {
    vertex_count: usize,
    root: usize,
    vertices: Vec<VertexRecord>,
    edges: Vec<EdgeRecord>,
}

impl From<&ResistanceNetwork> for NetworkDocument {
    fn from(net: &ResistanceNetwork) -> Self {
        let vertices = (0..net.vertex_count())
            .map(|id| VertexRecord {
                id,
                coords: net.coords().map(|c| c[id].clone()),
                measure: net.measure()[id],
            })
            .collect();
        let edges = net
            .edges()
            .iter()
            .map(|e| EdgeRecord { u: e.u, v: e.v, conductance: e.conductance })
            .collect();
        Self { vertex_count: net.vertex_count(), root: net.root(), vertices, edges }
    }
}

impl NetworkDocument {
    fn into_network(self) -> Result<ResistanceNetwork> {
        let n = self.vertex_count;
        let mut measure = vec![f64::NAN; n];
        let mut coords: Vec<Option<Vec<f64>>> = vec![None; n];
        for v in self.vertices {
            if v.id >= n {
                return Err(Error::VertexOutOfRange { vertex: v.id, count: n });
            }
            if !measure[v.id].is_nan() {
                bail!(InvalidNetwork, "vertex {} listed twice", v.id);
            }
            measure[v.id] = v.measure;
            coords[v.id] = v.coords;
        }
        if let Some(i) = measure.iter().position(|m| m.is_nan()) {
            bail!(InvalidNetwork, "vertex {i} has no record");
        }
        let net = ResistanceNetwork::new(
            n,
            self.edges.into_iter().map(|e| (e.u, e.v, e.conductance)),
            measure,
            self.root,
        )?;
        if coords.iter().all(Option::is_some) && n > 0 {
            net.with_coords(coords.into_iter().flatten().collect())
        } else if coords.iter().any(Option::is_some) {
            bail!(InvalidNetwork, "coordinates given for some vertices only")
        } else {
            Ok(net)
        }
    }
}

pub fn write_network<W: Write>(net: &ResistanceNetwork, format: NetworkFormat, mut out: W) -> Result<()> {
    match format {
        NetworkFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &NetworkDocument::from(net))?;
            writeln!(out)?;
        }
        NetworkFormat::Text => {
            writeln!(out, "network {} root {}", net.vertex_count(), net.root())?;
            for id in 0..net.vertex_count() {
                write!(out, "v {} {:?}", id, net.measure()[id])?;
                if let Some(c) = net.coords() {
                    for x in &c[id] {
                        write!(out, " {x:?}")?;
                    }
                }
                writeln!(out)?;
            }
            for e in net.edges() {
                writeln!(out, "e {} {} {:?}", e.u, e.v, e.conductance)?;
            }
        }
    }
    Ok(())
}

pub fn read_network<R: BufRead>(format: NetworkFormat, input: R) -> Result<ResistanceNetwork> {
    match format {
        NetworkFormat::Json => {
            let doc: NetworkDocument = serde_json::from_reader(input)?;
            doc.into_network()
        }
        NetworkFormat::Text => parse_text(input)?.into_network(),
    }
}

fn parse_text<R: BufRead>(input: R) -> Result<NetworkDocument> {
    let mut header: Option<(usize, usize)> = None;
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let err = |message: &str| Error::Parse { line: lineno, message: message.to_string() };
        let int = |s: &str| s.parse::<usize>().map_err(|_| err(&format!("bad integer `{s}`")));
        let float = |s: &str| s.parse::<f64>().map_err(|_| err(&format!("bad number `{s}`")));
        match fields[0] {
            "network" => {
                if fields.len() != 4 || fields[2] != "root" {
                    return Err(err("expected `network <count> root <id>`"));
                }
                if header.is_some() {
                    return Err(err("duplicate header"));
                }
                header = Some((int(fields[1])?, int(fields[3])?));
            }
            "v" => {
                if fields.len() < 3 {
                    return Err(err("expected `v <id> <measure> [coords]`"));
                }
                let coords = fields[3..].iter().map(|s| float(s)).collect::<Result<Vec<_>>>()?;
                vertices.push(VertexRecord {
                    id: int(fields[1])?,
                    measure: float(fields[2])?,
                    coords: (!coords.is_empty()).then_some(coords),
                });
            }
            "e" => {
                if fields.len() != 4 {
                    return Err(err("expected `e <u> <v> <conductance>`"));
                }
                edges.push(EdgeRecord { u: int(fields[1])?, v: int(fields[2])?, conductance: float(fields[3])? });
            }
            other => return Err(err(&format!("unknown record `{other}`"))),
        }
    }
    let (vertex_count, root) = header.ok_or(Error::Parse { line: 0, message: "missing header".into() })?;
    Ok(NetworkDocument { vertex_count, root, vertices, edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_fractal_graph, FractalScheme};

    fn roundtrip(net: &ResistanceNetwork, format: NetworkFormat) -> ResistanceNetwork {
        let mut buf = Vec::new();
        write_network(net, format, &mut buf).unwrap();
        read_network(format, buf.as_slice()).unwrap()
    }

    #[test]
    fn both_formats_are_lossless() {
        let g = build_fractal_graph(&FractalScheme::gasket(), 3).unwrap();
        let net = g.network.with_conductances(
            &(0..g.network.edge_count()).map(|i| 1.0 / (i as f64 + 3.0)).collect::<Vec<_>>(),
        )
        .unwrap();
        assert_eq!(roundtrip(&net, NetworkFormat::Text), net);
        assert_eq!(roundtrip(&net, NetworkFormat::Json), net);
    }

    #[test]
    fn text_errors_carry_line_numbers() {
        let bad = "network 2 root 0\nv 0 1.0\nv 1 x\ne 0 1 1.0\n";
        match read_network(NetworkFormat::Text, bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let missing = "network 2 root 0\nv 0 1.0\ne 0 1 1.0\n";
        assert!(read_network(NetworkFormat::Text, missing.as_bytes()).is_err());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = "# two vertices\nnetwork 2 root 1\n\nv 0 1 # first\nv 1 2\ne 1 0 0.5\n";
        let net = read_network(NetworkFormat::Text, text.as_bytes()).unwrap();
        assert_eq!(net.root(), 1);
        assert_eq!(net.measure(), &[1.0, 2.0]);
        assert_eq!(net.edges()[0].conductance, 0.5);
    }
}

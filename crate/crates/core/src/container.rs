//! Versioned CSV container for domains and fields.
//!
//! Line 1 is `finsler-sobolev-field,<version>,<kind>,<shape>` where shape is
//! `n0xn1x…` for box charts and the subdivision level for icospheres. Line 2
//! names the columns; then one row per node: coordinates, value, support flag.
//! Box extents are recovered from the first and last rows.

use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use crate::domain::{build_box_chart, build_icosphere, DiscreteDomain, DomainKind};
use crate::error::{Error, Result};
use crate::field::ScalarField;

pub const CONTAINER_MAGIC: &str = "finsler-sobolev-field";
pub const CONTAINER_VERSION: u32 = 1;

fn shape(domain: &DiscreteDomain) -> (String, String) {
    match domain.kind() {
        DomainKind::BoxChart(g) => ("box".into(), g.nodes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")),
        DomainKind::IcoSphere(m) => ("icosphere".into(), m.level.to_string()),
    }
}

fn coord_names(domain: &DiscreteDomain) -> Vec<String> {
    (0..domain.ambient_dim()).map(|k| format!("x{k}")).collect()
}

pub fn write_field_to<W: std::io::Write>(field: &ScalarField, out: W) -> Result<()> {
    let domain = field.domain();
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let (kind, shape) = shape(domain);
    let io = |e: csv::Error| Error::Container(e.to_string());
    w.write_record([CONTAINER_MAGIC.to_string(), CONTAINER_VERSION.to_string(), kind, shape]).map_err(io)?;
    let mut header = coord_names(domain);
    header.push("value".into());
    header.push("support".into());
    w.write_record(&header).map_err(io)?;
    for i in 0..field.len() {
        let mut row: Vec<String> = domain.point(i).iter().map(|x| x.to_string()).collect();
        row.push(field.values()[i].to_string());
        row.push(u8::from(field.support()[i]).to_string());
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_field(field: &ScalarField, path: &Path) -> Result<()> {
    write_field_to(field, File::create(path)?)
}

/// A domain is stored as a field of zeros with empty support.
pub fn write_domain(domain: &Arc<DiscreteDomain>, path: &Path) -> Result<()> {
    let zero =
        ScalarField::with_support(domain.clone(), vec![0.0; domain.node_count()], vec![false; domain.node_count()])?;
    write_field(&zero, path)
}

pub fn read_field_from<R: std::io::Read>(input: R) -> Result<ScalarField> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = r.records();
    let bad = |m: &str| Error::Container(m.to_string());
    let head = records.next().ok_or_else(|| bad("empty container"))?.map_err(|e| bad(&e.to_string()))?;
    if head.len() != 4 || &head[0] != CONTAINER_MAGIC {
        return Err(bad("missing container header"));
    }
    if head[1].parse::<u32>().ok() != Some(CONTAINER_VERSION) {
        return Err(Error::Container(format!("unsupported container version {}", &head[1])));
    }
    let kind = head[2].to_string();
    let shape = head[3].to_string();
    let columns = records.next().ok_or_else(|| bad("missing column row"))?.map_err(|e| bad(&e.to_string()))?;
    let dim = columns.len().checked_sub(2).ok_or_else(|| bad("too few columns"))?;
    let mut coords = Vec::new();
    let mut values = Vec::new();
    let mut support = Vec::new();
    for (line, rec) in records.enumerate() {
        let rec = rec.map_err(|e| bad(&e.to_string()))?;
        if rec.len() != dim + 2 {
            return Err(Error::Container(format!("row {} has {} fields, expected {}", line + 3, rec.len(), dim + 2)));
        }
        let num = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| Error::Container(format!("bad number '{s}' in row {}", line + 3)))
        };
        coords.push((0..dim).map(|k| num(&rec[k])).collect::<Result<Vec<f64>>>()?);
        values.push(num(&rec[dim])?);
        support.push(match rec[dim + 1].trim() {
            "1" => true,
            "0" => false,
            s => return Err(Error::Container(format!("bad support flag '{s}'"))),
        });
    }
    let domain = match kind.as_str() {
        "box" => {
            let nodes: Vec<usize> = shape
                .split('x')
                .map(|s| s.parse().map_err(|_| Error::Container(format!("bad shape '{shape}'"))))
                .collect::<Result<_>>()?;
            if nodes.len() != dim || coords.is_empty() {
                return Err(bad("shape does not match the coordinate columns"));
            }
            build_box_chart(&coords[0], &coords[coords.len() - 1], &nodes)?
        }
        "icosphere" => build_icosphere(shape.parse().map_err(|_| Error::Container(format!("bad level '{shape}'")))?)?,
        other => return Err(Error::Container(format!("unknown domain kind '{other}'"))),
    };
    if domain.node_count() != coords.len() {
        return Err(Error::Container(format!("expected {} nodes, found {}", domain.node_count(), coords.len())));
    }
    for (i, c) in coords.iter().enumerate() {
        let p = domain.point(i);
        if p.iter().zip(c).any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + a.abs())) {
            return Err(Error::Container(format!("node {i} coordinates do not match the rebuilt domain")));
        }
    }
    ScalarField::with_support(Arc::new(domain), values, support)
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    read_field_from(File::open(path)?)
}

pub fn read_domain(path: &Path) -> Result<Arc<DiscreteDomain>> {
    Ok(read_field(path)?.domain().clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_round_trip() {
        let d = Arc::new(build_box_chart(&[-1.0, 0.0], &[1.0, 0.5], &[5, 3]).unwrap());
        let f = ScalarField::from_fn(d.clone(), |x| x[0] * 0.1 + x[1]).unwrap();
        let mut buf = Vec::new();
        write_field_to(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("finsler-sobolev-field,1,box,5x3\nx0,x1,value,support\n"));
        let g = read_field_from(buf.as_slice()).unwrap();
        assert_eq!(g.values(), f.values());
        assert_eq!(g.support(), f.support());
        assert_eq!(g.domain().as_box(), d.as_box());
    }

    #[test]
    fn sphere_round_trip() {
        let d = Arc::new(build_icosphere(1).unwrap());
        let f = ScalarField::from_fn(d, |x| x[2]).unwrap();
        let mut buf = Vec::new();
        write_field_to(&f, &mut buf).unwrap();
        let g = read_field_from(buf.as_slice()).unwrap();
        assert_eq!(g.values(), f.values());
    }

    #[test]
    fn corrupt_containers_are_rejected() {
        assert!(read_field_from("nonsense\n".as_bytes()).is_err());
        assert!(read_field_from("finsler-sobolev-field,9,box,2\nx0,value,support\n0,1,1\n1,1,1\n".as_bytes()).is_err());
        assert!(read_field_from("finsler-sobolev-field,1,box,3\nx0,value,support\n0,1,1\n1,1,1\n".as_bytes()).is_err());
        assert!(read_field_from("finsler-sobolev-field,1,box,3\nx0,value,support\n0,1,1\n0.5,x,1\n1,1,1\n".as_bytes())
            .is_err());
        let ok = read_field_from("finsler-sobolev-field,1,box,3\nx0,value,support\n0,1,1\n0.5,0,0\n1,1,1\n".as_bytes())
            .unwrap();
        assert_eq!(ok.values(), &[1.0, 0.0, 1.0]);
    }
}

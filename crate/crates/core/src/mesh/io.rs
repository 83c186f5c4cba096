//! ASCII mesh format.
//!
//! ```text
//! # comment
//! dim ncells nverts nbfacets
//! x y [z]                 (nverts lines)
//! v0 v1 v2 [v3]           (ncells lines, 0-based)
//! v0 v1 [v2] marker       (nbfacets lines)
//! ```

use std::io::{BufRead, Write};

use super::{cell_geometry, BoundaryFacet, Mesh};
use crate::error::{Error, Result};

/// Reads a mesh. Cells stored with negative orientation are flipped; the
/// result is checked for conformity. The mesh is treated as a level-0 mesh.
pub fn read_mesh<R: BufRead>(reader: R) -> Result<Mesh> {
    let mut tokens: Vec<(usize, String)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("");
        tokens.extend(content.split_whitespace().map(|t| (i + 1, t.to_string())));
    }
    let mut it = tokens.into_iter();
    let mut last_line = 0;
    let mut next_usize = |what: &str| -> Result<usize> {
        let (line, t) = it.next().ok_or(Error::Parse {
            line: last_line,
            msg: format!("unexpected end of file, expected {what}"),
        })?;
        last_line = line;
        t.parse::<f64>()
            .ok()
            .filter(|v| v.fract() == 0.0 && *v >= 0.0)
            .map(|v| v as usize)
            .or_else(|| t.parse::<usize>().ok())
            .ok_or(Error::Parse {
                line,
                msg: format!("expected {what}, found '{t}'"),
            })
    };
    let dim = next_usize("dimension")?;
    if dim != 2 && dim != 3 {
        return Err(Error::Parse {
            line: 1,
            msg: format!("dimension must be 2 or 3, got {dim}"),
        });
    }
    let ncells = next_usize("cell count")?;
    let nverts = next_usize("vertex count")?;
    let nfacets = next_usize("facet count")?;

    let mut rest = it;
    let mut line_no = last_line;
    let mut next_tok = |what: &str| -> Result<(usize, String)> {
        let tok = rest.next().ok_or(Error::Parse {
            line: line_no,
            msg: format!("unexpected end of file, expected {what}"),
        })?;
        line_no = tok.0;
        Ok(tok)
    };
    let parse_f = |(line, t): (usize, String)| -> Result<f64> {
        t.parse::<f64>().map_err(|_| Error::Parse {
            line,
            msg: format!("expected a number, found '{t}'"),
        })
    };
    let parse_i = |(line, t): (usize, String), bound: usize| -> Result<usize> {
        match t.parse::<usize>() {
            Ok(v) if v < bound => Ok(v),
            Ok(v) => Err(Error::Parse {
                line,
                msg: format!("vertex index {v} out of range (nverts {bound})"),
            }),
            Err(_) => Err(Error::Parse {
                line,
                msg: format!("expected an index, found '{t}'"),
            }),
        }
    };

    let mut vertices = Vec::with_capacity(nverts);
    for _ in 0..nverts {
        let mut p = [0.0; 3];
        for c in p.iter_mut().take(dim) {
            *c = parse_f(next_tok("coordinate")?)?;
        }
        vertices.push(p);
    }
    let mut cells = Vec::with_capacity(ncells);
    for ci in 0..ncells {
        let mut c = [usize::MAX; 4];
        for v in c.iter_mut().take(dim + 1) {
            *v = parse_i(next_tok("cell vertex")?, nverts)?;
        }
        let vol = cell_geometry(dim, &vertices, &c[..=dim]).volume;
        if vol == 0.0 || !vol.is_finite() {
            return Err(Error::InvalidMesh(format!("cell {ci} is degenerate")));
        }
        if vol < 0.0 {
            c.swap(dim - 1, dim);
        }
        cells.push(c);
    }
    let mut facets = Vec::with_capacity(nfacets);
    for _ in 0..nfacets {
        let mut v = [usize::MAX; 3];
        for x in v.iter_mut().take(dim) {
            *x = parse_i(next_tok("facet vertex")?, nverts)?;
        }
        let (line, t) = next_tok("facet marker")?;
        let marker = t.parse::<i32>().map_err(|_| Error::Parse {
            line,
            msg: format!("expected an integer marker, found '{t}'"),
        })?;
        facets.push(BoundaryFacet {
            vertices: v,
            marker,
        });
    }
    if let Some((line, t)) = rest.next() {
        return Err(Error::Parse {
            line,
            msg: format!("trailing token '{t}'"),
        });
    }
    let mesh = Mesh::from_parts(dim, vertices, cells, facets, 0, None)?;
    mesh.check_conformity()?;
    Ok(mesh)
}

pub fn write_mesh<W: Write>(mesh: &Mesh, mut w: W) -> Result<()> {
    let dim = mesh.dim();
    writeln!(w, "# level {}", mesh.level())?;
    writeln!(
        w,
        "{} {} {} {}",
        dim,
        mesh.n_cells(),
        mesh.n_vertices(),
        mesh.boundary_facets().len()
    )?;
    for v in mesh.vertices() {
        let coords: Vec<String> = v[..dim].iter().map(|x| format!("{x:e}")).collect();
        writeln!(w, "{}", coords.join(" "))?;
    }
    for c in mesh.cells() {
        let ids: Vec<String> = c.iter().map(|i| i.to_string()).collect();
        writeln!(w, "{}", ids.join(" "))?;
    }
    for f in mesh.boundary_facets() {
        let ids: Vec<String> = f.verts(dim).iter().map(|i| i.to_string()).collect();
        writeln!(w, "{} {}", ids.join(" "), f.marker)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured, refine_uniform, BoxDomain};

    #[test]
    fn round_trip() {
        for dim in [2, 3] {
            let m =
                refine_uniform(&build_structured(dim, &[2, 1, 1], &BoxDomain::unit(dim)).unwrap());
            let mut buf = Vec::new();
            write_mesh(&m, &mut buf).unwrap();
            let r = read_mesh(&buf[..]).unwrap();
            assert_eq!(r.vertices(), m.vertices());
            assert!(r.cells().eq(m.cells()));
            assert_eq!(r.boundary_facets(), m.boundary_facets());
        }
    }

    #[test]
    fn flips_negative_cells_and_skips_comments() {
        let text = "# unit square\n2 2 4 4\n0 0\n1 0\n1 1\n0 1 # last vertex\n0 2 1\n0 2 3\n0 1 3\n1 2 2\n2 3 4\n3 0 1\n";
        let m = read_mesh(text.as_bytes()).unwrap();
        assert!((m.total_volume() - 1.0).abs() < 1e-15);
        assert!((0..2).all(|c| m.cell_volume(c) > 0.0));
    }

    #[test]
    fn reports_bad_tokens() {
        let err = read_mesh("2 1 3 0\n0 0\n1 x\n0 1\n0 1 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = read_mesh("2 1 3 0\n0 0\n1 0\n0 1\n0 1 7\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err}");
    }

    #[test]
    fn nonconforming_boundary_rejected() {
        // boundary facets missing
        let text = "2 1 3 0\n0 0\n1 0\n0 1\n0 1 2\n";
        assert!(matches!(
            read_mesh(text.as_bytes()),
            Err(Error::InvalidMesh(_))
        ));
    }
}

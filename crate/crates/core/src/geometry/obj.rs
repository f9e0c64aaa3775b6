//! Minimal OBJ reader: `v` and `f` records only. Polygons are
//! fan-triangulated; texture/normal indices in `f` tokens are ignored.

use super::{MeshError, Point};

#[derive(Debug)]
pub(crate) struct RawObj {
    pub vertices: Vec<Point>,
    pub faces: Vec<[usize; 3]>,
    pub ignored_records: usize,
}

const IGNORED: &[&str] = &["vn", "vt", "vp", "o", "g", "s", "usemtl", "mtllib", "l"];

pub(crate) fn parse(text: &str) -> Result<RawObj, MeshError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut ignored_records = 0;

    for (lineno, raw_line) in text.split('\n').enumerate() {
        let line_no = lineno + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        let content = line.split('#').next().unwrap_or("");
        let mut tokens = tokens_with_offsets(content);
        let Some((_, keyword)) = tokens.next() else {
            continue;
        };
        match keyword {
            "v" => {
                let mut xyz = [0.0; 3];
                for slot in xyz.iter_mut() {
                    let (col, tok) = tokens.next().ok_or_else(|| MeshError::Parse {
                        line: line_no,
                        column: content.len() + 1,
                        message: "vertex needs three coordinates".into(),
                    })?;
                    *slot = tok.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                        MeshError::Parse {
                            line: line_no,
                            column: col + 1,
                            message: format!("invalid coordinate '{tok}'"),
                        }
                    })?;
                }
                vertices.push(Point::new(xyz[0], xyz[1], xyz[2]));
            }
            "f" => {
                let mut idx = Vec::with_capacity(4);
                for (col, tok) in tokens {
                    let head = tok.split('/').next().unwrap_or("");
                    let bad = || MeshError::Parse {
                        line: line_no,
                        column: col + 1,
                        message: format!("invalid face index '{tok}'"),
                    };
                    let value: i64 = head.parse().map_err(|_| bad())?;
                    let resolved = match value {
                        0 => return Err(bad()),
                        v if v > 0 => (v - 1) as usize,
                        v => {
                            let back = (-v) as usize;
                            if back > vertices.len() {
                                return Err(bad());
                            }
                            vertices.len() - back
                        }
                    };
                    if resolved >= vertices.len() {
                        return Err(MeshError::Parse {
                            line: line_no,
                            column: col + 1,
                            message: format!(
                                "face index {value} refers to a vertex not yet defined ({} so far)",
                                vertices.len()
                            ),
                        });
                    }
                    idx.push(resolved);
                }
                if idx.len() < 3 {
                    return Err(MeshError::Parse {
                        line: line_no,
                        column: 1,
                        message: format!("face needs at least 3 indices, got {}", idx.len()),
                    });
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            other if IGNORED.contains(&other) => ignored_records += 1,
            other => {
                return Err(MeshError::Parse {
                    line: line_no,
                    column: 1,
                    message: format!("unsupported record '{other}'"),
                })
            }
        }
    }

    Ok(RawObj { vertices, faces, ignored_records })
}

fn tokens_with_offsets(s: &str) -> impl Iterator<Item = (usize, &str)> {
    s.split([' ', '\t'])
        .scan(0usize, |pos, tok| {
            let start = *pos;
            *pos += tok.len() + 1;
            Some((start, tok))
        })
        .filter(|(_, t)| !t.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_is_fan_triangulated() {
        let obj = parse("v 0 0 0\r\nv 1 0 0\r\nv 1 1 0\r\nv 0 1 0\r\nf 1 2 3 4\r\n").unwrap();
        assert_eq!(obj.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn slash_and_negative_indices() {
        let obj = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2//2 -1\n").unwrap();
        assert_eq!(obj.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn bad_coordinate_reports_line_and_column() {
        match parse("v 0 0 0\nv 1 zz 0\n") {
            Err(MeshError::Parse { line, column, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(column, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_index_is_error() {
        assert!(matches!(
            parse("v 0 0 0\nf 1 2 3\n"),
            Err(MeshError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn comments_and_ignored_records() {
        let obj = parse("# header\nvn 0 0 1\nv 0 0 0 # trailing\n").unwrap();
        assert_eq!(obj.vertices.len(), 1);
        assert_eq!(obj.ignored_records, 1);
    }

    #[test]
    fn unknown_record_is_error() {
        assert!(matches!(parse("curv 0 1\n"), Err(MeshError::Parse { line: 1, .. })));
    }
}

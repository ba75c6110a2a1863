//! Domain readers for the JSON and `.poly` input formats.

use std::fmt;

use adaptmesh::{validate_polygon, Defect, Point2, PolygonDomain};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainFormat {
    Json,
    Poly,
}

impl DomainFormat {
    /// `.poly` files by extension, JSON otherwise.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("poly") => Self::Poly,
            _ => Self::Json,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputError {
    Syntax { line: usize, column: usize, message: String },
    /// A segment chain that does not close into a loop, reported at one of
    /// its vertices (as numbered in the file).
    OpenChain { vertex: usize },
    Topology(String),
    Defects(Vec<Defect>),
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Syntax { line, column, message } => write!(f, "{line}:{column}: {message}"),
            Self::OpenChain { vertex } => write!(f, "segment chain through vertex {vertex} is not closed"),
            Self::Topology(msg) => f.write_str(msg),
            Self::Defects(defects) => {
                f.write_str("invalid polygon:")?;
                for d in defects {
                    write!(f, "\n  {d}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for InputError {}

/// Parses and validates a domain. The returned domain has a counterclockwise
/// outer loop, clockwise holes and no repeated points.
pub fn parse_domain(text: &str, format: DomainFormat) -> Result<PolygonDomain, InputError> {
    let raw = match format {
        DomainFormat::Json => parse_json_domain(text)?,
        DomainFormat::Poly => parse_poly_domain(text)?,
    };
    validate_polygon(&raw)
        .map(|valid| valid.domain)
        .map_err(InputError::Defects)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainFile {
    outer: Vec<[f64; 2]>,
    #[serde(default)]
    holes: Vec<Vec<[f64; 2]>>,
}

fn to_points(raw: &[[f64; 2]]) -> Vec<Point2> {
    raw.iter().map(|&p| Point2::from(p)).collect()
}

/// Reads `{"outer": [[x, y], ...], "holes": [[[x, y], ...], ...]}` without
/// validating the geometry.
pub fn parse_json_domain(text: &str) -> Result<PolygonDomain, InputError> {
    let file: DomainFile = serde_json::from_str(text).map_err(|e| InputError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(PolygonDomain {
        outer: to_points(&file.outer),
        holes: file.holes.iter().map(|h| to_points(h)).collect(),
    })
}

struct Token<'a> {
    line: usize,
    column: usize,
    text: &'a str,
}

struct Records<'a> {
    lines: Vec<Vec<Token<'a>>>,
    next: usize,
    last_line: usize,
}

impl<'a> Records<'a> {
    fn new(text: &'a str) -> Self {
        let mut lines = Vec::new();
        let mut last_line = 1;
        for (i, raw) in text.lines().enumerate() {
            last_line = i + 1;
            let content = raw.split('#').next().unwrap_or("");
            let mut tokens = Vec::new();
            let mut offset = 0;
            for piece in content.split(|c: char| c.is_whitespace() || c == ',') {
                if !piece.is_empty() {
                    tokens.push(Token { line: i + 1, column: offset + 1, text: piece });
                }
                offset += piece.len() + 1;
            }
            if !tokens.is_empty() {
                lines.push(tokens);
            }
        }
        Self { lines, next: 0, last_line }
    }

    fn record(&mut self, what: &str, min_fields: usize) -> Result<&[Token<'a>], InputError> {
        let Some(tokens) = self.lines.get(self.next) else {
            return Err(InputError::Syntax {
                line: self.last_line,
                column: 1,
                message: format!("unexpected end of file, expected {what}"),
            });
        };
        self.next += 1;
        if tokens.len() < min_fields {
            return Err(InputError::Syntax {
                line: tokens[0].line,
                column: tokens[0].column,
                message: format!("{what} needs at least {min_fields} fields"),
            });
        }
        Ok(tokens)
    }

    fn optional_record(&mut self) -> Option<&[Token<'a>]> {
        let tokens = self.lines.get(self.next)?;
        self.next += 1;
        Some(tokens)
    }
}

fn number<T: std::str::FromStr>(token: &Token<'_>, what: &str) -> Result<T, InputError> {
    token.text.parse().map_err(|_| InputError::Syntax {
        line: token.line,
        column: token.column,
        message: format!("invalid {what} `{}`", token.text),
    })
}

/// Reads the node, segment and hole sections of a `.poly` file. Segments
/// must form closed loops; the loop of largest area is the outer boundary
/// and every hole seed selects the smallest loop around it.
pub fn parse_poly_domain(text: &str) -> Result<PolygonDomain, InputError> {
    let mut records = Records::new(text);

    let header = records.record("node header", 2)?;
    let count: usize = number(&header[0], "node count")?;
    let dim: usize = number(&header[1], "dimension")?;
    if dim != 2 {
        return Err(InputError::Syntax {
            line: header[1].line,
            column: header[1].column,
            message: format!("dimension must be 2, got {dim}"),
        });
    }
    if count == 0 {
        let t = &header[0];
        return Err(InputError::Syntax {
            line: t.line,
            column: t.column,
            message: "nodes must be listed in the file itself".into(),
        });
    }
    let mut base = 0;
    let mut points = Vec::with_capacity(count);
    for k in 0..count {
        let rec = records.record("node", 3)?;
        let id: usize = number(&rec[0], "node index")?;
        if k == 0 && id <= 1 {
            base = id;
        }
        if id != base + k {
            return Err(InputError::Syntax {
                line: rec[0].line,
                column: rec[0].column,
                message: format!("expected node {}, found {id}", base + k),
            });
        }
        points.push(Point2::new(number(&rec[1], "coordinate")?, number(&rec[2], "coordinate")?));
    }

    let header = records.record("segment header", 1)?;
    let seg_count: usize = number(&header[0], "segment count")?;
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); count];
    for _ in 0..seg_count {
        let rec = records.record("segment", 3)?;
        let mut ends = [0usize; 2];
        for (k, token) in rec[1..3].iter().enumerate() {
            let id: usize = number(token, "segment endpoint")?;
            if id < base || id - base >= count {
                return Err(InputError::Syntax {
                    line: token.line,
                    column: token.column,
                    message: format!("segment endpoint {id} is not a node"),
                });
            }
            ends[k] = id - base;
        }
        if ends[0] == ends[1] {
            let t = &rec[0];
            return Err(InputError::Syntax {
                line: t.line,
                column: t.column,
                message: "segment has equal endpoints".into(),
            });
        }
        adjacency[ends[0]].push(ends[1]);
        adjacency[ends[1]].push(ends[0]);
    }

    let mut seeds = Vec::new();
    if let Some(header) = records.optional_record() {
        let hole_count: usize = number(&header[0], "hole count")?;
        for _ in 0..hole_count {
            let rec = records.record("hole", 3)?;
            seeds.push(Point2::new(number(&rec[1], "coordinate")?, number(&rec[2], "coordinate")?));
        }
    }

    let loops = trace_loops(&adjacency).map_err(|v| InputError::OpenChain { vertex: v + base })?;
    if loops.is_empty() {
        return Err(InputError::Topology("no segments".into()));
    }
    let polygons: Vec<Vec<Point2>> = loops
        .iter()
        .map(|l| l.iter().map(|&v| points[v]).collect())
        .collect();
    let areas: Vec<f64> = polygons.iter().map(|p| shoelace(p).abs()).collect();
    let outer = (0..polygons.len())
        .max_by(|&a, &b| areas[a].total_cmp(&areas[b]).then(b.cmp(&a)))
        .expect("at least one loop");

    let mut is_hole = vec![false; polygons.len()];
    for seed in &seeds {
        let chosen = (0..polygons.len())
            .filter(|&l| l != outer && contains(&polygons[l], *seed))
            .min_by(|&a, &b| areas[a].total_cmp(&areas[b]).then(a.cmp(&b)));
        match chosen {
            Some(l) => is_hole[l] = true,
            None => {
                return Err(InputError::Topology(format!(
                    "hole seed ({}, {}) is not enclosed by an inner loop",
                    seed.x, seed.y
                )))
            }
        }
    }
    if let Some(l) = (0..polygons.len()).find(|&l| l != outer && !is_hole[l]) {
        return Err(InputError::Topology(format!(
            "loop through vertex {} has no hole seed",
            loops[l][0] + base
        )));
    }
    Ok(PolygonDomain {
        outer: polygons[outer].clone(),
        holes: (0..polygons.len())
            .filter(|&l| is_hole[l])
            .map(|l| polygons[l].clone())
            .collect(),
    })
}

/// Splits a segment graph into closed loops, or returns a vertex whose
/// degree is not two.
fn trace_loops(adjacency: &[Vec<usize>]) -> Result<Vec<Vec<usize>>, usize> {
    if let Some(v) = (0..adjacency.len()).find(|&v| !adjacency[v].is_empty() && adjacency[v].len() != 2) {
        return Err(v);
    }
    let mut seen = vec![false; adjacency.len()];
    let mut loops = Vec::new();
    for start in 0..adjacency.len() {
        if seen[start] || adjacency[start].is_empty() {
            continue;
        }
        let mut lp = vec![start];
        seen[start] = true;
        let (mut prev, mut cur) = (start, adjacency[start][0]);
        while cur != start {
            seen[cur] = true;
            lp.push(cur);
            let next = if adjacency[cur][0] == prev { adjacency[cur][1] } else { adjacency[cur][0] };
            prev = cur;
            cur = next;
        }
        loops.push(lp);
    }
    Ok(loops)
}

fn shoelace(p: &[Point2]) -> f64 {
    (0..p.len())
        .map(|i| p[i].cross(p[(i + 1) % p.len()]))
        .sum::<f64>()
        * 0.5
}

fn contains(polygon: &[Point2], q: Point2) -> bool {
    let mut inside = false;
    for i in 0..polygon.len() {
        let (a, b) = (polygon[i], polygon[(i + 1) % polygon.len()]);
        if (a.y > q.y) != (b.y > q.y) && q.x < a.x + (q.y - a.y) / (b.y - a.y) * (b.x - a.x) {
            inside = !inside;
        }
    }
    inside
}

//! Shared test oracles, independent of the implementation paths they check:
//! Floyd–Warshall all-pairs distances, a full-table DTW, direct PC/LS
//! summation, a hand-rolled reference action matcher, and the seeded noise
//! corpus for parser conformance.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vln::world::WorldGraph;
use vln::{Real, ViewpointId};

/// Floyd–Warshall all-pairs shortest distances over the edge weights.
pub struct AllPairs {
    pub ids: Vec<ViewpointId>,
    index: BTreeMap<ViewpointId, usize>,
    pub dist: Vec<Vec<Real>>,
}

impl AllPairs {
    pub fn compute(world: &WorldGraph) -> AllPairs {
        let ids: Vec<ViewpointId> = world.nodes().keys().cloned().collect();
        let index: BTreeMap<ViewpointId, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let n = ids.len();
        let mut dist = vec![vec![Real::INFINITY; n]; n];
        for (i, row) in dist.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for (a, b, w) in world.edges() {
            let (i, j) = (index[a], index[b]);
            dist[i][j] = w;
            dist[j][i] = w;
        }
        for k in 0..n {
            for i in 0..n {
                if !dist[i][k].is_finite() {
                    continue;
                }
                for j in 0..n {
                    let via = dist[i][k] + dist[k][j];
                    if via < dist[i][j] {
                        dist[i][j] = via;
                    }
                }
            }
        }
        AllPairs { ids, index, dist }
    }

    pub fn d(&self, a: &str, b: &str) -> Real {
        self.dist[self.index[a]][self.index[b]]
    }
}

/// Full-table DTW over a pairwise cost function.
pub fn dtw_table(n: usize, m: usize, cost: impl Fn(usize, usize) -> Real) -> Real {
    let mut table = vec![vec![Real::INFINITY; m + 1]; n + 1];
    table[0][0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let c = cost(i - 1, j - 1);
            let best = table[i - 1][j - 1]
                .min(table[i - 1][j])
                .min(table[i][j - 1]);
            table[i][j] = c + best;
        }
    }
    table[n][m]
}

/// Metric oracle values computed entirely from Floyd–Warshall distances and
/// raw edge weights.
pub struct MetricOracle {
    pub tl: Real,
    pub ne: Real,
    pub sr: bool,
    pub osr: bool,
    pub spl: Real,
    pub ndtw: Real,
    pub cls: Real,
}

pub fn metric_oracle(
    world: &WorldGraph,
    pairs: &AllPairs,
    start: &str,
    goals: &[ViewpointId],
    gt: &[ViewpointId],
    executed: &[ViewpointId],
    d_th: Real,
) -> MetricOracle {
    let tl: Real = executed
        .windows(2)
        .map(|p| world.edge_weight(&p[0], &p[1]).expect("contiguous"))
        .sum();
    let last = executed.last().expect("non-empty");
    let ne = goals
        .iter()
        .map(|g| pairs.d(last, g))
        .fold(Real::INFINITY, Real::min);
    let sr = ne <= d_th;
    let osr = executed.iter().any(|v| {
        goals
            .iter()
            .map(|g| pairs.d(v, g))
            .fold(Real::INFINITY, Real::min)
            <= d_th
    });
    let shortest = goals
        .iter()
        .map(|g| pairs.d(start, g))
        .fold(Real::INFINITY, Real::min);
    let spl = if shortest == 0.0 {
        if sr {
            1.0
        } else {
            0.0
        }
    } else if sr {
        shortest / tl.max(shortest)
    } else {
        0.0
    };
    let dtw = dtw_table(executed.len(), gt.len(), |i, j| {
        pairs.d(&executed[i], &gt[j])
    });
    let ndtw = (-dtw / (gt.len() as Real * d_th)).exp();
    let pc: Real = gt
        .iter()
        .map(|r| {
            let min = executed
                .iter()
                .map(|p| pairs.d(r, p))
                .fold(Real::INFINITY, Real::min);
            (-min / d_th).exp()
        })
        .sum::<Real>()
        / gt.len() as Real;
    let gt_len: Real = gt
        .windows(2)
        .map(|p| world.edge_weight(&p[0], &p[1]).expect("gt contiguous"))
        .sum();
    let epl = pc * gt_len;
    let ls = if epl == 0.0 && tl == 0.0 {
        1.0
    } else {
        epl / (epl + (epl - tl).abs())
    };
    MetricOracle {
        tl,
        ne,
        sr,
        osr,
        spl,
        ndtw,
        cls: pc * ls,
    }
}

/// A contiguous random walk from `start`, up to `steps` moves.
pub fn random_walk(
    world: &WorldGraph,
    start: &str,
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<ViewpointId> {
    let mut walk = vec![start.to_string()];
    let mut current = start.to_string();
    for _ in 0..steps {
        let neighbors = world.neighbors(&current).expect("valid node");
        if neighbors.is_empty() {
            break;
        }
        let (next, _) = neighbors[rng.random_range(0..neighbors.len())];
        current = next.clone();
        walk.push(current.clone());
    }
    walk
}

// ---------------------------------------------------------------------------
// Reference action matcher: an independent, regex-free implementation of the
// extraction rules, used to adjudicate parser conformance.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefAction {
    Marker(u32),
    Direction(String),
    Stop,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Case-insensitive word occurrences of `word` in `chars`.
fn word_positions(chars: &[char], word: &str) -> Vec<usize> {
    let needle: Vec<char> = word.chars().collect();
    let mut positions = Vec::new();
    let n = chars.len();
    let m = needle.len();
    if m == 0 || n < m {
        return positions;
    }
    for i in 0..=n - m {
        let matched = (0..m).all(|k| chars[i + k].to_ascii_lowercase() == needle[k]);
        if !matched {
            continue;
        }
        let left_ok = i == 0 || !is_word_char(chars[i - 1]);
        let right_ok = i + m == n || !is_word_char(chars[i + m]);
        if left_ok && right_ok {
            positions.push(i);
        }
    }
    positions
}

/// Independent implementation of the extraction contract: first `Action`
/// declaration that yields a value wins; within its 64-char window an
/// earlier stop beats a number, a number beats a direction anywhere.
pub fn reference_match(text: &str) -> Option<RefAction> {
    let chars: Vec<char> = text.chars().collect();
    for decl in word_positions(&chars, "action") {
        let window_start = decl + "action".len();
        let window_end = (window_start + 64).min(chars.len());
        let window = &chars[window_start.min(chars.len())..window_end];

        let stop_at = word_positions(window, "stop").first().copied();
        let mut number: Option<(usize, u32)> = None;
        let mut i = 0;
        while i < window.len() {
            if window[i].is_ascii_digit() {
                let begin = i;
                let mut value = String::new();
                while i < window.len() && window[i].is_ascii_digit() {
                    value.push(window[i]);
                    i += 1;
                }
                if let Ok(v) = value.parse::<u32>() {
                    number = Some((begin, v));
                    break;
                }
            } else {
                i += 1;
            }
        }
        let direction = ["left", "front", "right", "back"]
            .iter()
            .filter_map(|d| {
                word_positions(window, d)
                    .first()
                    .map(|&at| (at, d.to_string()))
            })
            .min_by_key(|(at, _)| *at);

        let token = match (stop_at, &number, &direction) {
            (Some(s), Some((n, _)), _) if s < *n => Some(RefAction::Stop),
            (Some(s), None, Some((d, _))) if s < *d => Some(RefAction::Stop),
            (Some(_), None, None) => Some(RefAction::Stop),
            (_, Some((_, v)), _) => Some(RefAction::Marker(*v)),
            (_, None, Some((_, d))) => Some(RefAction::Direction(d.clone())),
            _ => None,
        };
        if token.is_some() {
            return token;
        }
    }
    None
}

/// One corpus case: text, intended token, whether it conforms to the strict
/// output grammar (for which extraction must recover the intent exactly).
pub struct CorpusCase {
    pub text: String,
    pub intended: Option<RefAction>,
    pub conforming: bool,
}

/// Deterministic 200-case noise corpus: grammar-conforming cases plus
/// decorated variants (markdown, arrows, fences, tag permutations) and a
/// handful with no action at all.
pub fn noise_corpus(seed: u64, cases: usize) -> Vec<CorpusCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prose = [
        "I believe the hallway matches the description.",
        "The rug and the lamp look familiar.",
        "Considering everything seen so far,",
        "Hmm.",
        "After weighing the views carefully:",
    ];
    let reasoning_fill = [
        "The described doorway lies ahead.",
        "Progress seems consistent with the route so far.",
        "The first clause of the route is already done.",
    ];
    let mut corpus = Vec::with_capacity(cases);
    for k in 0..cases {
        let roll = rng.random_range(0..10);
        if roll == 9 {
            // No action declaration at all.
            let text = format!(
                "{} Nothing here names a move.",
                prose[rng.random_range(0..prose.len())]
            );
            corpus.push(CorpusCase {
                text,
                intended: None,
                conforming: false,
            });
            continue;
        }
        let intended = match rng.random_range(0..6) {
            0..=2 => RefAction::Marker(rng.random_range(1..9)),
            3 => RefAction::Stop,
            _ => RefAction::Direction(
                ["left", "front", "right", "back"][rng.random_range(0..4)].to_string(),
            ),
        };
        let value = match &intended {
            RefAction::Marker(m) => m.to_string(),
            RefAction::Direction(d) => {
                let mut c = d.chars();
                c.next().unwrap().to_ascii_uppercase().to_string() + c.as_str()
            }
            RefAction::Stop => "Stop".to_string(),
        };
        let decoration = rng.random_range(0..8);
        let (body, conforming) = match decoration {
            0 => (format!("Action: {value}"), true),
            1 => (format!("**Action**: `{value}`"), false),
            2 => (format!("Action -> {value}"), false),
            3 => (format!("<Action>{value}</Action>"), false),
            4 => (format!("action = {value} (final)"), false),
            5 => (format!("Action:\n{value}"), false),
            6 => (format!("```\nAction: {value}\n```"), false),
            _ => (format!("Action   :   {value}."), false),
        };
        let mut text = String::new();
        if rng.random_bool(0.4) {
            text.push_str(prose[rng.random_range(0..prose.len())]);
            text.push('\n');
        }
        if rng.random_bool(0.3) {
            text.push_str(&format!(
                "<Reasoning>{}</Reasoning>\n",
                reasoning_fill[rng.random_range(0..reasoning_fill.len())]
            ));
        }
        text.push_str(&body);
        if rng.random_bool(0.3) {
            text.push_str(&format!(
                "\n<Reflection>{}</Reflection>\nFinal Decision: Keep",
                reasoning_fill[rng.random_range(0..reasoning_fill.len())]
            ));
        }
        // Conforming means: bare grammar body with no surrounding noise.
        let conforming = conforming && !text.contains('\n');
        let _ = k;
        corpus.push(CorpusCase {
            text,
            intended: Some(intended),
            conforming,
        });
    }
    corpus
}

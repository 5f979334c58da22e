#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use syzygy::betti::GradedBettiTable;
use syzygy::grading::DEFAULT_PRIME;
use syzygy::linalg::SparseMatrix;
use syzygy::schur::Bipartition;
use syzygy::strands::{PlanOptions, Window};
use syzygy::EmbeddingSpec;

pub fn spec(b1: i64, b2: i64, d1: i64, d2: i64) -> EmbeddingSpec {
    EmbeddingSpec::standard(d1, d2, b1, b2).unwrap()
}

pub fn window(w: &str) -> PlanOptions {
    PlanOptions {
        window: Some(w.parse::<Window>().unwrap()),
        full_rank: false,
    }
}

pub struct Golden {
    pub b: (i64, i64),
    pub d: (i64, i64),
    /// (q, first p, values).
    pub rows: &'static [(i64, i64, &'static [u64])],
}

impl Golden {
    pub fn spec(&self) -> EmbeddingSpec {
        spec(self.b.0, self.b.1, self.d.0, self.d.1)
    }

    pub fn table(&self) -> GradedBettiTable {
        GradedBettiTable::from_rows(self.spec(), self.rows)
    }
}

/// Published Betti tables, rows q = 0, 1, 2.
pub const GOLDEN: &[Golden] = &[
    Golden {
        b: (0, 0),
        d: (2, 2),
        rows: &[(0, 0, &[1]), (1, 1, &[20, 64, 90, 64, 20]), (2, 6, &[1])],
    },
    Golden {
        b: (0, 0),
        d: (2, 3),
        rows: &[
            (0, 0, &[1]),
            (1, 1, &[43, 222, 558, 840, 798, 468, 147, 8]),
            (2, 8, &[9, 2]),
        ],
    },
    Golden {
        b: (1, 1),
        d: (2, 3),
        rows: &[
            (0, 0, &[4, 28, 72, 56]),
            (1, 2, &[8, 168, 504, 672, 528, 252, 68, 8]),
        ],
    },
    Golden {
        b: (0, 0),
        d: (2, 4),
        rows: &[
            (0, 0, &[1]),
            (
                1,
                1,
                &[75, 536, 1947, 4488, 7095, 7920, 6237, 3344, 1089, 120, 11],
            ),
            (2, 10, &[66, 24, 3]),
        ],
    },
    Golden {
        b: (1, 1),
        d: (2, 4),
        rows: &[
            (0, 0, &[4, 36, 120, 120]),
            (
                1,
                2,
                &[32, 660, 2772, 5808, 7920, 7524, 5060, 2376, 744, 140, 12],
            ),
        ],
    },
    Golden {
        b: (0, 0),
        d: (3, 3),
        rows: &[
            (0, 0, &[1]),
            (
                1,
                1,
                &[
                    87, 676, 2691, 6864, 12155, 15444, 14157, 9152, 3861, 780, 22,
                ],
            ),
            (2, 10, &[165, 144, 39, 4]),
        ],
    },
    Golden {
        b: (1, 1),
        d: (3, 3),
        rows: &[
            (0, 0, &[4, 39, 144, 165]),
            (
                1,
                2,
                &[
                    22, 780, 3861, 9152, 14157, 15444, 12155, 6864, 2691, 676, 87,
                ],
            ),
            (2, 13, &[1]),
        ],
    },
];

pub const GOLDEN_25: Golden = Golden {
    b: (0, 0),
    d: (2, 5),
    rows: &[
        (0, 0, &[1]),
        (
            1,
            1,
            &[
                116, 1060, 5040, 15652, 34580, 56628, 70070, 65780, 46332, 23660, 8008, 1260, 195,
                14,
            ],
        ),
        (2, 12, &[455, 210, 45, 4]),
    ],
};

pub const GOLDEN_34: Golden = Golden {
    b: (0, 0),
    d: (3, 4),
    rows: &[
        (0, 0, &[1]),
        (
            1,
            1,
            &[
                147, 1530, 8364, 30192, 78540, 153816, 232050, 272272, 247962, 172380, 87516,
                28560, 3939, 238, 15,
            ],
        ),
        (2, 12, &[1287, 3094, 1800, 528, 85, 6]),
    ],
};

fn bp(w: Weight) -> Bipartition {
    Bipartition::new(w.0, w.1, w.2, w.3).unwrap()
}

type Weight = (i64, i64, i64, i64);

fn summands(list: &[(Weight, u64)]) -> BTreeMap<Bipartition, u64> {
    list.iter().map(|&(w, m)| (bp(w), m)).collect()
}

/// Published Schur decompositions of every nonzero K_{p,q} for b = (1,2), D = (2,3).
pub fn schur_12_23() -> BTreeMap<(i64, i64), BTreeMap<Bipartition, u64>> {
    let k41 = summands(&[((6, 5, 9, 8), 1), ((7, 4, 10, 7), 1), ((8, 3, 11, 6), 1)]);
    BTreeMap::from([
        ((0, 0), summands(&[((1, 0, 2, 0), 1)])),
        (
            (1, 0),
            summands(&[
                ((2, 1, 3, 2), 1),
                ((2, 1, 4, 1), 1),
                ((2, 1, 5, 0), 1),
                ((3, 0, 3, 2), 1),
                ((3, 0, 4, 1), 1),
            ]),
        ),
        (
            (2, 0),
            summands(&[
                ((3, 2, 4, 4), 1),
                ((3, 2, 5, 3), 2),
                ((3, 2, 6, 2), 2),
                ((3, 2, 7, 1), 1),
                ((4, 1, 4, 4), 1),
                ((4, 1, 5, 3), 2),
                ((4, 1, 6, 2), 2),
                ((4, 1, 7, 1), 1),
                ((5, 0, 5, 3), 1),
            ]),
        ),
        (
            (3, 0),
            summands(&[
                ((4, 3, 6, 5), 2),
                ((4, 3, 7, 4), 3),
                ((4, 3, 8, 3), 2),
                ((4, 3, 9, 2), 1),
                ((5, 2, 6, 5), 2),
                ((5, 2, 7, 4), 3),
                ((5, 2, 8, 3), 2),
                ((5, 2, 9, 2), 1),
                ((6, 1, 6, 5), 1),
                ((6, 1, 7, 4), 1),
                ((6, 1, 8, 3), 1),
            ]),
        ),
        (
            (4, 0),
            summands(&[
                ((5, 4, 7, 7), 1),
                ((5, 4, 8, 6), 2),
                ((5, 4, 9, 5), 2),
                ((5, 4, 10, 4), 1),
                ((5, 4, 11, 3), 1),
                ((6, 3, 7, 7), 1),
                ((6, 3, 8, 6), 2),
                ((6, 3, 9, 5), 2),
                ((6, 3, 10, 4), 1),
                ((7, 2, 8, 6), 1),
                ((7, 2, 9, 5), 1),
                ((7, 2, 10, 4), 1),
            ]),
        ),
        ((4, 1), k41.clone()),
        ((5, 0), k41),
        (
            (5, 1),
            summands(&[
                ((7, 6, 10, 10), 1),
                ((7, 6, 11, 9), 2),
                ((7, 6, 12, 8), 2),
                ((7, 6, 13, 7), 1),
                ((7, 6, 14, 6), 1),
                ((8, 5, 10, 10), 1),
                ((8, 5, 11, 9), 2),
                ((8, 5, 12, 8), 2),
                ((8, 5, 13, 7), 1),
                ((9, 4, 11, 9), 1),
                ((9, 4, 12, 8), 1),
                ((9, 4, 13, 7), 1),
            ]),
        ),
        (
            (6, 1),
            summands(&[
                ((8, 7, 12, 11), 2),
                ((8, 7, 13, 10), 3),
                ((8, 7, 14, 9), 2),
                ((8, 7, 15, 8), 1),
                ((9, 6, 12, 11), 2),
                ((9, 6, 13, 10), 3),
                ((9, 6, 14, 9), 2),
                ((9, 6, 15, 8), 1),
                ((10, 5, 12, 11), 1),
                ((10, 5, 13, 10), 1),
                ((10, 5, 14, 9), 1),
            ]),
        ),
        (
            (7, 1),
            summands(&[
                ((9, 8, 13, 13), 1),
                ((9, 8, 14, 12), 2),
                ((9, 8, 15, 11), 2),
                ((9, 8, 16, 10), 1),
                ((10, 7, 13, 13), 1),
                ((10, 7, 14, 12), 2),
                ((10, 7, 15, 11), 2),
                ((10, 7, 16, 10), 1),
                ((11, 6, 14, 12), 1),
            ]),
        ),
        (
            (8, 1),
            summands(&[
                ((10, 9, 15, 14), 1),
                ((10, 9, 16, 13), 1),
                ((10, 9, 17, 12), 1),
                ((11, 8, 15, 14), 1),
                ((11, 8, 16, 13), 1),
            ]),
        ),
        ((9, 1), summands(&[((11, 10, 17, 15), 1)])),
    ])
}

pub fn k80_223() -> BTreeMap<Bipartition, u64> {
    summands(&[
        ((17, 9, 17, 9), 1),
        ((16, 10, 16, 10), 1),
        ((15, 11, 15, 11), 1),
        ((14, 12, 14, 12), 1),
        ((13, 13, 13, 13), 1),
    ])
}

/// Published distinct-Schur counts along row q = 1 for b = 0, D = (3,4).
pub const DISTINCT_34: [u64; 15] = [9, 26, 42, 52, 67, 71, 82, 80, 87, 78, 79, 63, 49, 5, 1];

pub fn random_sparse(rng: &mut ChaCha8Rng) -> SparseMatrix {
    let rows = rng.gen_range(0..=200usize);
    let cols = rng.gen_range(0..=200usize);
    let mut cells = BTreeMap::new();
    if rows > 0 && cols > 0 {
        let target = rng.gen_range(0..=(rows * cols).min(4 * (rows + cols)));
        // Low-rank structure now and then, so rank deficiency is exercised.
        let dup = rng.gen_bool(0.3);
        for _ in 0..target {
            let r = rng.gen_range(0..rows) as u32;
            let c = rng.gen_range(0..cols) as u32;
            let v = if rng.gen_bool(0.5) {
                rng.gen_range(1..DEFAULT_PRIME)
            } else {
                [1, DEFAULT_PRIME - 1][rng.gen_range(0..2)]
            };
            cells.insert((c, r), v);
            if dup && (r as usize) + 1 < rows {
                cells.insert((c, r + 1), v);
            }
        }
    }
    let entries = cells.into_iter().map(|((c, r), v)| (r, c, v)).collect();
    SparseMatrix {
        rows,
        cols,
        modulus: DEFAULT_PRIME,
        entries,
    }
}

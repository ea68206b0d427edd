//! PAM k-medoids: greedy BUILD followed by eager SWAP passes. Swap costs for
//! all medoids against one candidate are evaluated together from each
//! object's nearest and second-nearest medoid distances.

/// Symmetric dissimilarity matrix over `n` objects, stored densely.
#[derive(Debug, Clone)]
pub struct Dissimilarity {
    n: usize,
    d: Vec<f64>,
}

impl Dissimilarity {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }
}

pub const MAX_SWAP_PASSES: usize = 100;

const IMPROVEMENT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Medoids {
    /// Medoid object indices, ascending.
    pub medoids: Vec<usize>,
    /// Position in `medoids` of each object's cluster.
    pub assignment: Vec<usize>,
    pub sizes: Vec<usize>,
    pub total: f64,
    pub passes: usize,
}

/// Nearest and second-nearest medoid of one object.
#[derive(Clone, Copy)]
struct Near {
    slot: usize,
    dn: f64,
    ds: f64,
}

fn nearest(d: &Dissimilarity, medoids: &[usize], o: usize) -> Near {
    let row = d.row(o);
    let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
    let mut second = f64::INFINITY;
    for (slot, &m) in medoids.iter().enumerate() {
        let v = row[m];
        if v < best.0 || (v == best.0 && m < best.2) {
            second = best.0;
            best = (v, slot, m);
        } else if v < second {
            second = v;
        }
    }
    Near {
        slot: best.1,
        dn: best.0,
        ds: second,
    }
}

fn build(d: &Dissimilarity, k: usize) -> Vec<usize> {
    let n = d.len();
    let first = (0..n)
        .map(|i| (d.row(i).iter().sum::<f64>(), i))
        .fold(
            (f64::INFINITY, 0),
            |best, cur| if cur.0 < best.0 { cur } else { best },
        )
        .1;
    let mut medoids = vec![first];
    let mut is_medoid = vec![false; n];
    is_medoid[first] = true;
    let mut dn: Vec<f64> = d.row(first).to_vec();
    while medoids.len() < k {
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for x in (0..n).filter(|&x| !is_medoid[x]) {
            let row = d.row(x);
            let gain: f64 = dn.iter().zip(row).map(|(&a, &b)| (a - b).max(0.0)).sum();
            if gain > best.0 {
                best = (gain, x);
            }
        }
        let x = best.1;
        is_medoid[x] = true;
        medoids.push(x);
        for (a, &b) in dn.iter_mut().zip(d.row(x)) {
            *a = a.min(b);
        }
    }
    medoids
}

/// Clusters the objects of `d` around `k` medoids. Ties (equal cost, equal
/// gain, equidistant medoids) go to the lowest object index.
pub fn pam(d: &Dissimilarity, k: usize) -> Medoids {
    let n = d.len();
    assert!(k >= 1 && k <= n, "k = {k} outside 1..={n}");
    let mut medoids = build(d, k);
    let mut is_medoid = vec![false; n];
    for &m in &medoids {
        is_medoid[m] = true;
    }
    let mut near: Vec<Near> = (0..n).map(|o| nearest(d, &medoids, o)).collect();
    let mut delta = vec![0.0; k];
    let mut passes = 0;
    while passes < MAX_SWAP_PASSES {
        passes += 1;
        let mut swapped = false;
        for x in 0..n {
            if is_medoid[x] {
                continue;
            }
            let row = d.row(x);
            let mut shared = 0.0;
            delta.iter_mut().for_each(|v| *v = 0.0);
            for (o, nr) in near.iter().enumerate() {
                let dox = row[o];
                let gain = (dox - nr.dn).min(0.0);
                shared += gain;
                delta[nr.slot] += dox.min(nr.ds) - nr.dn - gain;
            }
            let (slot, best) = delta
                .iter()
                .enumerate()
                .map(|(s, &v)| (s, shared + v))
                .fold((usize::MAX, f64::INFINITY), |b, c| {
                    let better = c.1 < b.1
                        || (c.1 == b.1
                            && medoids[c.0] < medoids.get(b.0).copied().unwrap_or(usize::MAX));
                    if better {
                        c
                    } else {
                        b
                    }
                });
            if best < -IMPROVEMENT_EPS {
                is_medoid[medoids[slot]] = false;
                is_medoid[x] = true;
                medoids[slot] = x;
                for (o, nr) in near.iter_mut().enumerate() {
                    *nr = nearest(d, &medoids, o);
                }
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&s| medoids[s]);
    let mut rank = vec![0; k];
    for (r, &s) in order.iter().enumerate() {
        rank[s] = r;
    }
    let assignment: Vec<usize> = near.iter().map(|nr| rank[nr.slot]).collect();
    let mut sizes = vec![0; k];
    for &a in &assignment {
        sizes[a] += 1;
    }
    Medoids {
        medoids: order.iter().map(|&s| medoids[s]).collect(),
        total: near.iter().map(|nr| nr.dn).sum(),
        assignment,
        sizes,
        passes,
    }
}

/// Total dissimilarity of every object to its nearest medoid.
pub fn total_cost(d: &Dissimilarity, medoids: &[usize]) -> f64 {
    (0..d.len())
        .map(|o| {
            medoids
                .iter()
                .map(|&m| d.get(o, m))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

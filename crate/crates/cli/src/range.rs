//! Grid specifications: `lo:hi:step`, `lo:hi:logN`, comma lists, or a single value.

use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{x}` is not a number"))
                .and_then(|v| if v.is_finite() { Ok(v) } else { Err(format!("`{x}` is not finite")) })
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [single] if single.contains(',') => {
                let v: Result<Vec<f64>, String> = single.split(',').map(num).collect();
                Ok(Grid(v?))
            }
            [single] => Ok(Grid(vec![num(single)?])),
            [lo, hi, spec] => {
                let (lo, hi) = (num(lo)?, num(hi)?);
                if !(hi >= lo) {
                    return Err(format!("range `{s}` has hi < lo"));
                }
                if let Some(n) = spec.trim().strip_prefix("log") {
                    let n: usize = n.parse().map_err(|_| format!("bad point count in `{s}`"))?;
                    if n < 2 || !(lo > 0.0) {
                        return Err(format!("log range `{s}` needs lo > 0 and >= 2 points"));
                    }
                    let (l0, l1) = (lo.ln(), hi.ln());
                    let mut v: Vec<f64> = (0..n)
                        .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
                        .collect();
                    v[0] = lo;
                    v[n - 1] = hi;
                    Ok(Grid(v))
                } else {
                    let step = num(spec)?;
                    if !(step > 0.0) {
                        return Err(format!("range `{s}` needs a positive step"));
                    }
                    let n = ((hi - lo) / step + 1e-9).floor() as usize;
                    if n > 10_000_000 {
                        return Err(format!("range `{s}` has too many points"));
                    }
                    Ok(Grid((0..=n).map(|i| lo + step * i as f64).collect()))
                }
            }
            _ => Err(format!("cannot parse grid `{s}`; use lo:hi:step, lo:hi:logN or a,b,c")),
        }
    }
}

/// Comma-separated integers.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|_| format!("`{x}` is not a count")))
        .collect()
}

/// `d1,d2`.
pub fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("`{x}` is not a number")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(format!("expected two comma-separated values, got `{s}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_ranges_include_both_ends() {
        let g: Grid = "0.5:1.6:0.005".parse().unwrap();
        assert_eq!(g.0.len(), 221);
        assert!((g.0[220] - 1.6).abs() < 1e-12);
        let g: Grid = "1.0:1.414:0.002".parse().unwrap();
        assert_eq!(g.0.len(), 208);
    }

    #[test]
    fn log_ranges() {
        let g: Grid = "0.1:300:log40".parse().unwrap();
        assert_eq!(g.0.len(), 40);
        assert_eq!(g.0[0], 0.1);
        assert_eq!(g.0[39], 300.0);
        assert!(g.0.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn lists_and_errors() {
        assert_eq!("1,2.5".parse::<Grid>().unwrap().0, vec![1.0, 2.5]);
        assert_eq!("3".parse::<Grid>().unwrap().0, vec![3.0]);
        assert!("2:1:0.1".parse::<Grid>().is_err());
        assert!("0:1:0".parse::<Grid>().is_err());
        assert!("0:1:log5".parse::<Grid>().is_err());
        assert!("a:b".parse::<Grid>().is_err());
        assert_eq!(parse_sizes("400,625").unwrap(), vec![400, 625]);
        assert_eq!(parse_pair("0.5, 0.5").unwrap(), [0.5, 0.5]);
        assert!(parse_pair("1").is_err());
    }
}

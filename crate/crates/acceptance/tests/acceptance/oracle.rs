//! Reference computations written from first principles, sharing no code
//! with the crates under test.

/// Reflected bit-serial CRC: LSB first with the reversed generator 0xA6BC
/// (0x3D65 mirrored), complemented at the end.
pub fn crc_bit_serial(data: &[u8]) -> u16 {
    let mut reg: u16 = 0;
    for &byte in data {
        for bit in 0..8 {
            let feed = (reg ^ (byte >> bit) as u16) & 1;
            reg >>= 1;
            if feed == 1 {
                reg ^= 0xA6BC;
            }
        }
    }
    !reg
}

/// Gauss-Jordan elimination with partial pivoting on a dense copy.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty column");
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col];
        a[col][col..].iter_mut().for_each(|v| *v /= d);
        b[col] /= d;
        let pivot_row = a[col].clone();
        for (row, line) in a.iter_mut().enumerate() {
            if row != col && line[col] != 0.0 {
                let f = line[col];
                for (v, p) in line[col..].iter_mut().zip(&pivot_row[col..]) {
                    *v -= f * p;
                }
                b[row] -= f * b[col];
            }
        }
    }
    b
}

/// One branch of a connected network, buses by position.
#[derive(Debug, Clone, Copy)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub x: f64,
}

/// Lossless DC flows (MW, from-to) for a connected network given net MW
/// injections per bus. Bus 0 is the angle reference.
pub fn dc_flows(buses: usize, lines: &[Line], injection_mw: &[f64], base_mva: f64) -> Vec<f64> {
    let m = buses - 1;
    let mut b = vec![vec![0.0; m]; m];
    for l in lines {
        let y = 1.0 / l.x;
        for (s, t) in [(l.from, l.to), (l.to, l.from)] {
            if s == 0 {
                continue;
            }
            b[s - 1][s - 1] += y;
            if t != 0 {
                b[s - 1][t - 1] -= y;
            }
        }
    }
    let p: Vec<f64> = injection_mw[1..].iter().map(|v| v / base_mva).collect();
    let mut theta = vec![0.0];
    theta.extend(dense_solve(b, p));
    lines
        .iter()
        .map(|l| (theta[l.from] - theta[l.to]) / l.x * base_mva)
        .collect()
}

/// Settled outputs when every unit shares the gap between load and the sum
/// of setpoints in proportion to its gain. `None` if a unit would leave its
/// limits, since the closed form no longer applies.
pub fn droop_settle(units: &[(f64, f64, f64, f64)], load: f64) -> Option<Vec<f64>> {
    let scheduled: f64 = units.iter().map(|u| u.0).sum();
    let gain: f64 = units.iter().map(|u| u.1).sum();
    let df = (scheduled - load) / gain;
    let out: Vec<f64> = units.iter().map(|&(s, g, _, _)| s - g * df).collect();
    out.iter()
        .zip(units)
        .all(|(p, &(_, _, lo, hi))| *p >= lo && *p <= hi)
        .then_some(out)
}

/// Sanity of the oracles themselves against hand-checked values.
pub fn self_check() -> Result<(), String> {
    // published check value for the link header 05 64 05 C0 01 00 00 04
    let header = [0x05, 0x64, 0x05, 0xC0, 0x01, 0x00, 0x00, 0x04];
    if crc_bit_serial(&header).to_le_bytes() != [0xE9, 0x21] {
        return Err(format!("oracle CRC of the reference header is {:04X}", crc_bit_serial(&header)));
    }
    let x = dense_solve(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]);
    if (x[0] - 0.8).abs() > 1e-12 || (x[1] - 1.4).abs() > 1e-12 {
        return Err(format!("oracle solve gave {x:?}"));
    }
    Ok(())
}

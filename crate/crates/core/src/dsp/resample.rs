//! Polyphase rational-ratio resampling with a Kaiser-windowed sinc filter.

/// Zeroth-order modified Bessel function of the first kind, by power series.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..60 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-16 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Lowpass prototype for interpolation by `l`: windowed sinc with cutoff at
/// the tighter of the two Nyquist limits and passband gain `l`.
fn design_lowpass(l: usize, m: usize, beta: f64, half_width: usize) -> Vec<f64> {
    let lm = l.max(m);
    let ntaps = 2 * half_width * lm + 1;
    let center = (ntaps / 2) as f64;
    let fc = 0.5 / lm as f64;
    let i0b = bessel_i0(beta);
    (0..ntaps)
        .map(|i| {
            let t = i as f64 - center;
            let w = bessel_i0(beta * (1.0 - (t / center) * (t / center)).max(0.0).sqrt()) / i0b;
            2.0 * fc * sinc(2.0 * fc * t) * w * l as f64
        })
        .collect()
}

/// Resamples `x` by the rational factor `l / m` (upsample by `l`, lowpass,
/// downsample by `m`). The filter is a Kaiser-windowed sinc with beta 8.
/// Output length is `floor(len * l / m)`.
pub fn resample_rational(x: &[f64], l: usize, m: usize) -> Vec<f64> {
    assert!(l > 0 && m > 0, "resample factors must be positive");
    if l == m {
        return x.to_vec();
    }
    let h = design_lowpass(l, m, 8.0, 12);
    let ntaps = h.len() as isize;
    let center = ntaps / 2;
    let out_len = x.len() * l / m;
    let mut out = vec![0.0; out_len];
    for (n, o) in out.iter_mut().enumerate() {
        // Output n sits at position n*m on the upsampled grid; only every
        // l-th upsampled slot holds an input sample.
        let pos = (n * m) as isize;
        let top = pos + center;
        let mut i = (top - ntaps + 1).div_euclid(l as isize);
        if (top - ntaps + 1).rem_euclid(l as isize) != 0 {
            i += 1;
        }
        let i_hi = top.div_euclid(l as isize);
        let mut acc = 0.0;
        let lo = i.max(0);
        let hi = i_hi.min(x.len() as isize - 1);
        let mut j = lo;
        while j <= hi {
            acc += x[j as usize] * h[(top - j * l as isize) as usize];
            j += 1;
        }
        *o = acc;
    }
    out
}

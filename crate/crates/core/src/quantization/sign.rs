pub const MAX_SIGN_DIMS: usize = 20;

/// Per-dimension sign code: bit `i` is set when `x_i > 0`.
pub fn sign_quantize(x: &[f64]) -> usize {
    assert!(x.len() <= MAX_SIGN_DIMS, "sign codes support at most {MAX_SIGN_DIMS} dimensions");
    x.iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .fold(0, |code, (i, _)| code | (1 << i))
}

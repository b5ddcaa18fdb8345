//! Dataset conventions shared by every CSV writer: LF line endings and
//! floats printed so that they parse back to the same bits.

use std::io::Write;

pub(crate) fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Shortest round-trip form; exponent notation outside `[1e-4, 1e15)`.
pub fn number(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&x.abs()) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub mod bench;
pub mod force;
pub mod grasp;
pub mod replay;
pub mod simulate;
pub mod sweep;

use std::path::Path;

use forte_core::trace::CsvSink;

use crate::fail::Failure;

/// Two-column `metric,value` file.
pub fn write_metrics(path: &Path, rows: &[(&str, String)]) -> Result<(), Failure> {
    let mut sink = CsvSink::create(path, &["metric", "value"])?;
    for (k, v) in rows {
        sink.line([*k, v.as_str()])?;
    }
    sink.finish()?;
    Ok(())
}

pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn finger_label(i: usize) -> &'static str {
    if i == 0 {
        "R"
    } else {
        "L"
    }
}

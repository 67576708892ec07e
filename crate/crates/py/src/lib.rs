//! Python bindings. Images cross the boundary as PNM bytes and blobs as
//! container bytes, so results match the CLI byte for byte.

use lowband_core::codecs::{
    dct_decode, dct_encode, huffman_image_decode, huffman_image_encode, predictive_decode, predictive_encode, CodecId,
    EncodedBlob,
};
use lowband_core::delivery::{simulate as run_link, LinkModel, Policy};
use lowband_core::metrics::{self, QualityReport};
use lowband_core::payloads::{caption_text, PayloadKind};
use lowband_core::raster::{generate_scene, read_annotations, read_pnm, write_annotations, write_pnm, SceneSpec};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

fn py_err(e: impl Into<lowband_core::Error>) -> PyErr {
    match e.into() {
        lowband_core::Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// MSE, PSNR (dB, `inf` when identical) and SSIM between two PNM images.
#[pyfunction]
#[pyo3(signature = (reference, candidate, psnr_max = 255.0))]
fn quality<'py>(py: Python<'py>, reference: &[u8], candidate: &[u8], psnr_max: f64) -> PyResult<Bound<'py, PyDict>> {
    let a = read_pnm(reference).map_err(py_err)?;
    let b = read_pnm(candidate).map_err(py_err)?;
    let r = QualityReport::measure(&a, &b, reference.len() as u64, candidate.len() as u64, psnr_max).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("mse", r.mse)?;
    d.set_item("psnr_db", r.psnr_db)?;
    d.set_item("ssim", r.ssim)?;
    d.set_item("compression_ratio_pct", r.compression_ratio_pct)?;
    Ok(d)
}

/// Encodes a PNM image with `huffman`, `predictive` or `dct`.
#[pyfunction]
#[pyo3(signature = (codec, pnm, quality = 75))]
fn encode<'py>(py: Python<'py>, codec: &str, pnm: &[u8], quality: u8) -> PyResult<Bound<'py, PyBytes>> {
    let image = read_pnm(pnm).map_err(py_err)?;
    let blob = match codec {
        "huffman" => huffman_image_encode(&image),
        "predictive" => predictive_encode(&image),
        "dct" => dct_encode(&image, quality),
        other => return Err(PyValueError::new_err(format!("unknown codec '{other}'"))),
    }
    .map_err(py_err)?;
    Ok(PyBytes::new(py, &blob.to_bytes()))
}

/// Decodes a container blob back to PNM bytes (embedding blobs need a model).
#[pyfunction]
fn decode<'py>(py: Python<'py>, blob: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    let blob = EncodedBlob::from_bytes(blob).map_err(py_err)?;
    let image = match blob.codec {
        CodecId::Huffman => huffman_image_decode(&blob),
        CodecId::Predictive => predictive_decode(&blob),
        CodecId::Dct => dct_decode(&blob),
        CodecId::AeEmbedding => return Err(PyValueError::new_err("embedding blobs need a model; use the CLI")),
    }
    .map_err(py_err)?;
    Ok(PyBytes::new(py, &write_pnm(&image)))
}

/// Template caption for a JSON-lines annotation file.
#[pyfunction]
fn caption(annotations: &[u8]) -> PyResult<String> {
    Ok(caption_text(&read_annotations(annotations).map_err(py_err)?))
}

/// Synthetic scene as `(pnm_bytes, annotation_jsonl_bytes)`.
#[pyfunction]
#[pyo3(signature = (seed, side = 256, objects = 4))]
fn synthetic_scene<'py>(
    py: Python<'py>,
    seed: u64,
    side: u32,
    objects: usize,
) -> PyResult<(Bound<'py, PyBytes>, Bound<'py, PyBytes>)> {
    let spec = SceneSpec { object_count: objects, ..SceneSpec::new(seed, side, side) };
    let (image, anns) = generate_scene(&spec).map_err(py_err)?;
    Ok((PyBytes::new(py, &write_pnm(&image)), PyBytes::new(py, &write_annotations(&anns))))
}

/// Spatial compression ratio in percent for an input and embedding side.
#[pyfunction]
fn compression_ratio_spatial(input_side: u32, output_side: u32) -> PyResult<f64> {
    metrics::compression_ratio_spatial(input_side, output_side).map_err(py_err)
}

/// Delivery timeline as `(index, kind, byte_size, arrival_s)` tuples in send order.
#[pyfunction]
#[pyo3(signature = (payloads, bandwidth_bps, latency_s = 0.0, policy = "hierarchical"))]
fn simulate(
    payloads: Vec<(String, u64)>,
    bandwidth_bps: f64,
    latency_s: f64,
    policy: &str,
) -> PyResult<Vec<(usize, String, u64, f64)>> {
    let items = payloads
        .iter()
        .map(|(kind, bytes)| Ok((kind.parse::<PayloadKind>().map_err(PyValueError::new_err)?, *bytes)))
        .collect::<PyResult<Vec<_>>>()?;
    let policy: Policy = policy.parse().map_err(PyValueError::new_err)?;
    let link = LinkModel::new(bandwidth_bps, latency_s).map_err(py_err)?;
    let timeline = run_link(&policy.plan(&items).map_err(py_err)?, &link).map_err(py_err)?;
    Ok(timeline.entries.iter().map(|e| (e.index, e.kind.name().to_string(), e.byte_size, e.arrival_s)).collect())
}

#[pymodule]
fn lowband(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(quality, m)?)?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(caption, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_scene, m)?)?;
    m.add_function(wrap_pyfunction!(compression_ratio_spatial, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}

use std::io::Read;

use flate2::read::GzDecoder;

use super::FetchError;
use crate::latex::{BundleFile, LatexBundle};

fn is_gzip(bytes: &[u8]) -> bool {
    bytes.starts_with(&[0x1f, 0x8b])
}

fn is_tar(bytes: &[u8]) -> bool {
    bytes.len() > 262 && &bytes[257..262] == b"ustar"
}

fn looks_like_latex(text: &str) -> bool {
    ["\\documentclass", "\\begin{document}", "\\section", "\\begin{"]
        .iter()
        .any(|m| text.contains(m))
}

/// Decodes a source archive as served by arXiv: a gzipped tar, a plain tar,
/// a single gzipped `.tex` file, or raw TeX. PDFs and archives without a
/// `.tex` member fail with [`FetchError::ArchiveNotLatex`].
pub fn bundle_from_archive(bytes: &[u8]) -> Result<LatexBundle, FetchError> {
    if bytes.starts_with(b"%PDF") {
        return Err(FetchError::ArchiveNotLatex);
    }
    let payload = if is_gzip(bytes) {
        let mut out = Vec::new();
        GzDecoder::new(bytes)
            .read_to_end(&mut out)
            .map_err(|e| FetchError::ArchiveUnavailable(format!("corrupt gzip stream: {e}")))?;
        out
    } else {
        bytes.to_vec()
    };

    if is_tar(&payload) {
        return tex_members(&payload);
    }
    if payload.starts_with(b"%PDF") {
        return Err(FetchError::ArchiveNotLatex);
    }
    match String::from_utf8(payload) {
        Ok(text) if looks_like_latex(&text) => Ok(LatexBundle::single("main.tex", text)),
        _ => Err(FetchError::ArchiveNotLatex),
    }
}

fn tex_members(tar_bytes: &[u8]) -> Result<LatexBundle, FetchError> {
    let mut archive = tar::Archive::new(tar_bytes);
    let entries = archive
        .entries()
        .map_err(|e| FetchError::ArchiveUnavailable(format!("corrupt tar: {e}")))?;
    let mut files = Vec::new();
    for entry in entries {
        let mut entry = entry.map_err(|e| FetchError::ArchiveUnavailable(format!("corrupt tar entry: {e}")))?;
        if !entry.header().entry_type().is_file() {
            continue;
        }
        let name = entry
            .path()
            .map_err(|e| FetchError::ArchiveUnavailable(format!("bad tar path: {e}")))?
            .to_string_lossy()
            .trim_start_matches("./")
            .to_string();
        if !name.to_ascii_lowercase().ends_with(".tex") {
            continue;
        }
        let mut raw = Vec::new();
        entry
            .read_to_end(&mut raw)
            .map_err(|e| FetchError::ArchiveUnavailable(format!("unreadable member {name}: {e}")))?;
        files.push(BundleFile {
            name,
            content: String::from_utf8_lossy(&raw).into_owned(),
        });
    }
    if files.is_empty() {
        return Err(FetchError::ArchiveNotLatex);
    }
    Ok(LatexBundle { files })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use flate2::write::GzEncoder;
    use flate2::Compression;
    use std::io::Write;

    pub(crate) fn tar_gz(members: &[(&str, &[u8])]) -> Vec<u8> {
        let mut builder = tar::Builder::new(Vec::new());
        for (name, data) in members {
            let mut header = tar::Header::new_gnu();
            header.set_size(data.len() as u64);
            header.set_mode(0o644);
            header.set_cksum();
            builder.append_data(&mut header, name, *data).unwrap();
        }
        let tar = builder.into_inner().unwrap();
        let mut gz = GzEncoder::new(Vec::new(), Compression::default());
        gz.write_all(&tar).unwrap();
        gz.finish().unwrap()
    }

    #[test]
    fn three_members_in_archive_order() {
        let bytes = tar_gz(&[
            ("main.tex", b"\\documentclass{article}\n"),
            ("fig.png", b"\x89PNG"),
            ("sec/exp.tex", b"\\section{Experiments}\n"),
            ("tables.tex", b"\\begin{table}\\end{table}\n"),
        ]);
        let bundle = bundle_from_archive(&bytes).unwrap();
        let names: Vec<_> = bundle.files.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, vec!["main.tex", "sec/exp.tex", "tables.tex"]);
        assert_eq!(
            bundle.concatenated(),
            "\\documentclass{article}\n\\section{Experiments}\n\\begin{table}\\end{table}\n"
        );
    }

    #[test]
    fn pdf_only_is_not_latex() {
        assert_eq!(bundle_from_archive(b"%PDF-1.5 ..."), Err(FetchError::ArchiveNotLatex));
        let bytes = tar_gz(&[("paper.pdf", b"%PDF-1.5")]);
        assert_eq!(bundle_from_archive(&bytes), Err(FetchError::ArchiveNotLatex));
    }

    #[test]
    fn single_gzipped_tex() {
        let mut gz = GzEncoder::new(Vec::new(), Compression::default());
        gz.write_all(b"\\documentclass{article}\\begin{document}x\\end{document}")
            .unwrap();
        let bundle = bundle_from_archive(&gz.finish().unwrap()).unwrap();
        assert_eq!(bundle.files.len(), 1);
        assert_eq!(bundle.files[0].name, "main.tex");
    }
}

use std::fs;
use std::path::Path;

use landscape::trainer::write_atomic;
use md5::{Digest, Md5};

use crate::error::{CliError, CliResult};

pub const DEFAULT_MIRROR: &str = "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com";

/// Published md5 digests of the gzipped files.
pub const FILES: [(&str, &str); 4] = [
    ("train-images-idx3-ubyte.gz", "8d4fb7e6c68d591d4c3dfef9ec88bf0d"),
    ("train-labels-idx1-ubyte.gz", "25c81989df183df01b3e8a0aad5dffbe"),
    ("t10k-images-idx3-ubyte.gz", "bef4ecab320f06d8554ea6380940ec79"),
    ("t10k-labels-idx1-ubyte.gz", "bb300cfdad3c16e7a12a480ee83cd310"),
];

const MAX_BYTES: u64 = 64 << 20;

pub fn md5_hex(bytes: &[u8]) -> String {
    format!("{:x}", Md5::digest(bytes))
}

fn download(url: &str) -> CliResult<Vec<u8>> {
    let mut resp = ureq::get(url).call().map_err(|e| CliError::io(url, e))?;
    resp.body_mut()
        .with_config()
        .limit(MAX_BYTES)
        .read_to_vec()
        .map_err(|e| CliError::io(url, e))
}

/// Files already present with the right digest are kept.
pub fn run(out: &Path, mirror: &str) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    for (name, digest) in FILES {
        let path = out.join(name);
        if let Ok(existing) = fs::read(&path) {
            if md5_hex(&existing) == digest {
                println!("{name}: present");
                continue;
            }
        }
        let url = format!("{}/{name}", mirror.trim_end_matches('/'));
        let bytes = download(&url)?;
        let got = md5_hex(&bytes);
        if got != digest {
            return Err(CliError::Data(format!("{url}: md5 {got}, expected {digest}")));
        }
        write_atomic(&path, &bytes)?;
        println!("{name}: {} bytes, md5 ok", bytes.len());
    }
    Ok(())
}

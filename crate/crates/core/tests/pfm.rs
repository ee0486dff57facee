mod common;

use std::path::PathBuf;

use scatterstereo::grid::Grid;
use scatterstereo::pfm::{read_mask, read_normals, read_pfm, read_scalar, write_mask, write_normals, write_scalar, PfmImage};
use scatterstereo::scene::Vec3;
use scatterstereo::Error;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Parses `opencv_expected.txt`: a header line `kind w h channels` followed by
/// a line of hex-encoded f32 bit patterns, top row first.
fn expected(kind: &str) -> (usize, usize, usize, Vec<u32>) {
    let text = std::fs::read_to_string(fixture("opencv_expected.txt")).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    while let Some(line) = lines.next() {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f[0] == kind {
            let bits = lines
                .next()
                .unwrap()
                .split_whitespace()
                .map(|h| u32::from_str_radix(h, 16).unwrap())
                .collect();
            return (f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap(), bits);
        }
    }
    panic!("no {kind} entry");
}

#[test]
fn reads_opencv_files_bit_exactly() {
    for (file, kind) in [("opencv_gray.pfm", "gray"), ("opencv_rgb.pfm", "rgb")] {
        let (w, h, ch, bits) = expected(kind);
        let img = read_pfm(&fixture(file)).unwrap();
        assert_eq!((img.width, img.height, img.channels), (w, h, ch), "{file}");
        let got: Vec<u32> = img.data.iter().map(|v| v.to_bits()).collect();
        assert_eq!(got, bits, "{file}");
    }
}

#[test]
fn written_files_parse_with_an_independent_reader() {
    let data: Vec<f32> = (0..5 * 3 * 3).map(|i| (i as f32 - 20.0) * 0.37).collect();
    let img = PfmImage::new(5, 3, 3, data.clone()).unwrap();
    let (w, h, ch, parsed) = common::parse_pfm(&img.encode());
    assert_eq!((w, h, ch), (5, 3, 3));
    assert_eq!(parsed, data);
}

#[test]
fn decodes_a_hand_built_file_in_both_byte_orders() {
    // 2x2 gray; file rows bottom-up: bottom row (3, 4) then top row (1, 2).
    for (scale, le) in [("-1.0", true), ("1.0", false)] {
        let mut bytes = format!("Pf\n2 2\n{scale}\n").into_bytes();
        for v in [3.0f32, 4.0, 1.0, 2.0] {
            bytes.extend_from_slice(&if le { v.to_le_bytes() } else { v.to_be_bytes() });
        }
        let img = PfmImage::decode(&bytes).unwrap();
        assert_eq!(img.data, vec![1.0, 2.0, 3.0, 4.0], "scale {scale}");
    }
}

#[test]
fn malformed_files_are_rejected() {
    let body = vec![0u8; 16];
    let with = |header: &str| {
        let mut b = header.as_bytes().to_vec();
        b.extend_from_slice(&body);
        b
    };
    for header in ["P6\n2 2\n-1.0\n", "Pf\n0 2\n-1.0\n", "Pf\n2 x\n-1.0\n", "Pf\n2 2\n0\n", "Pf\n2 2\nabc\n", "Pf\n2 3\n-1.0\n"] {
        assert!(matches!(PfmImage::decode(&with(header)), Err(Error::Pfm(_))), "{header:?}");
    }
    assert!(matches!(PfmImage::decode(b"Pf\n2"), Err(Error::Pfm(_))));
    let mut extra = with("Pf\n2 2\n-1.0\n");
    extra.push(0);
    assert!(matches!(PfmImage::decode(&extra), Err(Error::Pfm(_))));
    assert!(PfmImage::new(2, 2, 2, vec![0.0; 8]).is_err());
    assert!(PfmImage::new(2, 2, 1, vec![0.0; 3]).is_err());
}

#[test]
fn typed_helpers_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scalar = Grid::from_fn(4, 3, |x, y| x as f64 * 0.5 - y as f64);
    write_scalar(&dir.path().join("s.pfm"), &scalar).unwrap();
    assert_eq!(read_scalar(&dir.path().join("s.pfm")).unwrap(), scalar);

    let normals = Grid::from_fn(3, 2, |x, y| Vec3::new(x as f64 * 0.25, -(y as f64) * 0.5, -1.0));
    write_normals(&dir.path().join("n.pfm"), &normals).unwrap();
    assert_eq!(read_normals(&dir.path().join("n.pfm")).unwrap(), normals);

    let mask = Grid::from_fn(5, 4, |x, y| (x + y) % 3 == 0);
    write_mask(&dir.path().join("m.pfm"), &mask).unwrap();
    assert_eq!(read_mask(&dir.path().join("m.pfm")).unwrap(), mask);

    assert!(matches!(read_normals(&dir.path().join("s.pfm")), Err(Error::Pfm(_))));
    assert!(matches!(read_scalar(&dir.path().join("missing.pfm")), Err(Error::Io { .. })));
}

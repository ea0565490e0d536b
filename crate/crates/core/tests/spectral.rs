use std::f64::consts::PI;

use fiber_sentinel::spectral::{cwt, psd_welch, rasterize, read_pgm, write_pgm, WaveletBank};

const FS: f64 = 1.0 / 0.0026;

fn tone(freq: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * freq * i as f64 / FS).sin()).collect()
}

#[test]
fn tone_peaks_agree_between_cwt_and_psd() {
    let bank = WaveletBank::default();
    let freq = bank.center_freqs_hz[30];
    let x = tone(freq, 4096);

    let sg = cwt(&x, FS, &bank).unwrap();
    let mid = sg.n_time / 2;
    let best = (0..sg.n_scales).max_by(|&a, &b| sg.get(a, mid).total_cmp(&sg.get(b, mid))).unwrap();
    assert_eq!(best, 30);

    let psd = psd_welch(&x, FS, 1024, 512).unwrap();
    let df = psd.freqs_hz[1] - psd.freqs_hz[0];
    assert!((psd.freqs_hz[psd.peak_bin()] - freq).abs() <= df);
}

#[test]
fn scalogram_image_survives_pgm_round_trip() {
    let bank = WaveletBank::default();
    let x: Vec<f64> = tone(40.0, 2048).iter().zip(tone(120.0, 2048)).map(|(a, b)| a + 0.5 * b).collect();
    let img = rasterize(&cwt(&x, FS, &bank).unwrap(), 48).unwrap();
    assert_eq!(img.pixels.len(), 48 * 48);
    assert!(img.pixels.iter().all(|p| (0.0..=1.0).contains(p)));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.pgm");
    write_pgm(&img, &path).unwrap();
    let back = read_pgm(&path).unwrap();
    assert_eq!((back.width, back.height), (48, 48));
    for (q, p) in back.pixels.iter().zip(&img.pixels) {
        assert!((*q as f64 / 255.0 - p).abs() <= 0.5 / 255.0 + 1e-12);
    }
}

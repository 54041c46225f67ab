//! Built-in scenes.

use crate::imaging::{extract_window, paste_window, Image, RoIWindow};

const CAMERAMAN: &[u8] = include_bytes!("../../data/cameraman256.pgm");
const CAMERAMAN_HEADER: &[u8] = b"P5\n256 256\n255\n";

/// The 256x256 cameraman photograph scaled to `[0, 1]`.
pub fn cameraman() -> Image {
    assert!(CAMERAMAN.starts_with(CAMERAMAN_HEADER), "bundled graymap header");
    let body = &CAMERAMAN[CAMERAMAN_HEADER.len()..];
    Image::new(256, 256, body.iter().map(|&v| f64::from(v) / 255.0).collect()).expect("bundled graymap is 256x256")
}

/// 64x64 cameraman crops with flat, moderate and textured content, in that order.
pub fn cameraman_crops() -> [Image; 3] {
    let cam = cameraman();
    [(0, 192), (176, 176), (64, 112)].map(|(r, c)| {
        extract_window(&cam, &RoIWindow::new(r, c, 64, 0).expect("dyadic")).expect("inside the photograph")
    })
}

/// A scene plus the windows its textured patches occupy, most textured first.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub scene: Image,
    pub regions: Vec<RoIWindow>,
}

/// 256x256 smooth background holding three cameraman crops: head, camera
/// and shoulders (128), the face (64) and the gloved hands (32). Each
/// crop has structure that survives 8x8 averaging, so the low-resolution
/// image shows all three.
pub fn textured_composite() -> Fixture {
    let cam = cameraman();
    let regions = vec![
        RoIWindow::new(16, 16, 128, 1).expect("dyadic"),
        RoIWindow::new(160, 48, 64, 2).expect("dyadic"),
        RoIWindow::new(48, 192, 32, 3).expect("dyadic"),
    ];
    let sources = [(32, 64), (48, 72), (104, 128)];
    let mut scene = Image::from_fn(256, 256, |r, c| {
        0.35 + 0.08 * (r as f64 / 256.0) + 0.06 * (c as f64 / 256.0)
    });
    for (w, (r, c)) in regions.iter().zip(sources) {
        let src = RoIWindow::new(r, c, w.side, 0).expect("dyadic");
        let patch = extract_window(&cam, &src).expect("inside the photograph");
        scene = paste_window(&scene, w, &patch).expect("inside the scene");
    }
    Fixture { scene, regions }
}

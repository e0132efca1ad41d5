use image::imageops::FilterType;
use image::{DynamicImage, GenericImageView, RgbImage};

use super::DatasetError;

pub const SHEET_FRAMES: usize = 9;
const GRID: u32 = 3;

/// Lays nine temporally ordered frames out row-major on a 3×3 grid.
///
/// Every cell has the size of the largest frame width and height; frames
/// that do not fill it are scaled to fit, aspect ratio preserved, and
/// centred on black.
pub fn contact_sheet(frames: &[DynamicImage]) -> Result<RgbImage, DatasetError> {
    if frames.len() != SHEET_FRAMES {
        return Err(DatasetError::WrongFrameCount(frames.len()));
    }
    let cell_w = frames.iter().map(|f| f.width()).max().unwrap_or(1).max(1);
    let cell_h = frames.iter().map(|f| f.height()).max().unwrap_or(1).max(1);
    let mut sheet = RgbImage::new(cell_w * GRID, cell_h * GRID);

    for (i, frame) in frames.iter().enumerate() {
        let (col, row) = (i as u32 % GRID, i as u32 / GRID);
        let rgb = letterbox(frame, cell_w, cell_h);
        let x0 = col * cell_w + (cell_w - rgb.width()) / 2;
        let y0 = row * cell_h + (cell_h - rgb.height()) / 2;
        image::imageops::replace(&mut sheet, &rgb, x0 as i64, y0 as i64);
    }
    Ok(sheet)
}

fn letterbox(frame: &DynamicImage, cell_w: u32, cell_h: u32) -> RgbImage {
    let (w, h) = frame.dimensions();
    if w == cell_w && h == cell_h || w == 0 || h == 0 {
        return frame.to_rgb8();
    }
    let scale = (cell_w as f64 / w as f64).min(cell_h as f64 / h as f64);
    let nw = ((w as f64 * scale).round() as u32).clamp(1, cell_w);
    let nh = ((h as f64 * scale).round() as u32).clamp(1, cell_h);
    image::imageops::resize(&frame.to_rgb8(), nw, nh, FilterType::Triangle)
}

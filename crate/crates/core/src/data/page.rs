//! Fixed-grid cropping of scanned handwriting pages: a `rows x cols` layout
//! cut into cells that tile the page exactly.

use super::DataError;

#[derive(Debug, Clone)]
pub struct PageCell {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
    /// Pixels in the source image's channel layout (interleaved).
    pub pixels: Vec<u8>,
}

/// Cell (r, c) spans `[r*H/rows, (r+1)*H/rows) x [c*W/cols, (c+1)*W/cols)`
/// in integer arithmetic, covering the page with no gaps or overlap. Cells
/// come back in row-major order.
pub fn crop_page_grid(
    pixels: &[u8],
    height: usize,
    width: usize,
    channels: usize,
    rows: usize,
    cols: usize,
) -> Result<Vec<PageCell>, DataError> {
    if rows == 0 || cols == 0 || height < rows || width < cols {
        return Err(DataError::DegeneratePage {
            height,
            width,
            rows,
            cols,
        });
    }
    if pixels.len() != height * width * channels {
        return Err(DataError::ZeroDimension { width, height });
    }
    let row_bound = |r: usize| r * height / rows;
    let col_bound = |c: usize| c * width / cols;
    let mut cells = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (y0, y1) = (row_bound(r), row_bound(r + 1));
        for c in 0..cols {
            let (x0, x1) = (col_bound(c), col_bound(c + 1));
            let (ch, cw) = (y1 - y0, x1 - x0);
            let mut cell = Vec::with_capacity(ch * cw * channels);
            for y in y0..y1 {
                let start = (y * width + x0) * channels;
                cell.extend_from_slice(&pixels[start..start + cw * channels]);
            }
            cells.push(PageCell {
                row: r,
                col: c,
                height: ch,
                width: cw,
                pixels: cell,
            });
        }
    }
    Ok(cells)
}

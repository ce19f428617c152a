//! Renders the comparison table layouts with their published rows and a
//! row computed from an evaluation report.

use densemark::eval::{aggregate, published_rows, render_table, EvalConfig, PerImage, TableLayout, TableRow};

fn main() -> densemark::Result<()> {
    let per_image = [(10.0, 0.0286), (45.0, 0.0368), (75.0, 0.0476)]
        .iter()
        .enumerate()
        .map(|(i, &(yaw, nme))| PerImage { id: format!("img{i}"), yaw: Some(yaw), nme })
        .collect();
    let report = aggregate(per_image, &EvalConfig::default())?;

    let mut rows = published_rows(TableLayout::Aflw2000_68);
    rows.push(TableRow::from_report("this run", &report));
    print!("{}", render_table(TableLayout::Aflw2000_68, &rows));
    println!();
    for layout in [TableLayout::Aflw21, TableLayout::BackboneCompare] {
        print!("{}", render_table(layout, &published_rows(layout)));
        println!();
    }
    Ok(())
}

//! Ranked 2018 fire outbreak counts for Ghana by region and by sector.

use firesafe::report::{aggregate, bundled_regions, bundled_sectors};

fn main() {
    for (title, records) in [("By region", bundled_regions()), ("By sector", bundled_sectors())] {
        let summary = aggregate(&records).unwrap();
        println!("{title}");
        let widest = summary.ranked.first().map_or(1, |r| r.count);
        for r in &summary.ranked {
            let bar = "#".repeat((r.count * 40 / widest) as usize);
            println!("  {:<22}{:>5}  {bar}", r.category, r.count);
        }
        let max = summary.max.as_ref().unwrap();
        let min = summary.min.as_ref().unwrap();
        println!("  total {}, highest {} ({}), lowest {} ({})\n", summary.total, max.category, max.count, min.category, min.count);
    }
}

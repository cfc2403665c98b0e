//! Clustering accuracy under the best one-to-one mapping between cluster ids
//! and class labels.

use graphssl::accuracy;

fn main() -> graphssl::Result<()> {
    let truth = [0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2];
    let predicted = [7, 7, 7, 3, 3, 3, 3, 7, 9, 9, 9, 9];
    let report = accuracy(&predicted, &truth)?;
    println!("AC = {} ({} of {} samples)", report.ac, report.matched, truth.len());
    for (cluster, class) in &report.mapping {
        println!("  cluster {cluster} -> class {class}");
    }
    println!("confusion (rows: clusters {:?}, columns: classes {:?}):", report.cluster_ids, report.class_labels);
    println!("{}", report.confusion);
    Ok(())
}

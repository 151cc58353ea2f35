//! Hierarchical topic model on a planted three-level corpus: codes live in
//! the tree-norm ball, so a document uses a topic only if it uses its parent.

use structsparse::factorization::{self, FactorizationConfig};
use structsparse::synth::{self, Scenario, SynthData, SynthSpec};

fn main() -> structsparse::Result<()> {
    let spec = SynthSpec { scenario: Scenario::Topics, n: 150, p: 30, doc_length: 150, seed: 3, ..Default::default() };
    let SynthData::Topics { corpus, tree, .. } = synth::generate(&spec)? else { unreachable!() };
    let f = factorization::fit_topics(corpus.counts.view(), &tree, &FactorizationConfig { outer_iters: 150, ..Default::default() })?;
    for node in factorization::topic_report(&f, &tree, &corpus.vocab, 5) {
        let depth = std::iter::successors(node.parent, |&p| tree.parent(p)).count();
        println!("{}topic {} (used by {:.0}% of documents): {}", "  ".repeat(depth), node.node, 100.0 * node.usage, node.top_tokens.join(" "));
    }
    let rooted = f
        .a
        .columns()
        .into_iter()
        .filter(|c| tree.is_rooted_subtree(&c.iter().map(|v| *v > 1e-8).collect::<Vec<_>>()))
        .count();
    println!("documents with rooted topic sets: {rooted}/{}", f.a.ncols());
    Ok(())
}

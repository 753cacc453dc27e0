//! Load a network from a schema file and tab-separated node/edge lists.

use std::fs;
use std::path::PathBuf;

use crmp::hetgraph::{load_network, Direction, LoadOptions};

fn main() -> crmp::Result<()> {
    let dir = std::env::temp_dir().join("crmp-example-load");
    fs::create_dir_all(&dir).unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    };
    let schema = write(
        "schema.txt",
        "node user\nnode post\nnode location\n\
         link follow user user\nlink write user post\nlink checkin_at post location\n",
    );
    let nodes: Vec<(String, PathBuf)> = vec![
        ("user".into(), write("user.txt", "alice\nbob\ncarol\n")),
        ("post".into(), write("post.txt", "p1\np2\np3\n")),
        ("location".into(), write("location.txt", "cafe\npark\n")),
    ];
    let edges: Vec<(String, PathBuf)> = vec![
        ("follow".into(), write("follow.tsv", "alice\tbob\nbob\tcarol\ncarol\talice\nalice\tcarol\n")),
        ("write".into(), write("write.tsv", "alice\tp1\nbob\tp2\ncarol\tp3\n")),
        ("checkin_at".into(), write("checkin_at.tsv", "p1\tcafe\np2\tcafe\np3\tpark\n")),
    ];
    let net = load_network(&schema, &nodes, &edges, LoadOptions::default())?;
    print!("{}", net.stats());

    let follow = net.relation_matrix("follow", Direction::Forward)?;
    let ids = net.node_ids("user")?;
    for (u, id) in ids.iter().enumerate() {
        let out: Vec<&str> = follow.row(u).iter().map(|&v| ids[v as usize].as_str()).collect();
        println!("{id} follows {out:?}");
    }

    // an edge naming an unknown node is rejected with file and line
    let bad = vec![("follow".to_string(), write("bad.tsv", "alice\tbob\nalice\tdave\n"))];
    match load_network(&schema, &nodes, &bad, LoadOptions::default()) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}

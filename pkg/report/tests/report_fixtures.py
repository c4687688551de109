import csv

COLUMNS = (
    "model", "instance", "policy", "direction", "mode", "mean", "halfwidth",
    "n", "wall_time_ms", "seed", "table_rows", "tree_nodes",
)


def write_csv(path, rows):
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({col: row.get(col, "") for col in COLUMNS})


def row(instance, policy, direction, mode, mean, halfwidth,
        table_rows="", tree_nodes=""):
    return {
        "model": "mine", "instance": str(instance), "policy": policy,
        "direction": direction, "mode": mode, "mean": repr(mean),
        "halfwidth": repr(halfwidth), "n": 500, "wall_time_ms": 1234,
        "seed": 7, "table_rows": table_rows, "tree_nodes": tree_nodes,
    }

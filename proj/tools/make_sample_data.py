#!/usr/bin/env python3
"""Regenerates data/sample/ (sectioned documents, Posts.xml, a small BPE
vocabulary and the evaluation fixtures). Output is deterministic."""

import collections
import json
import pathlib
import random
import re
import sys
from xml.sax.saxutils import quoteattr

OUT = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "data/sample")

PRODUCTS = [
    ("WebSphere Application Server", "WAS"),
    ("DB2 Universal Database", "DB2"),
    ("MQ Series Broker", "MQ"),
    ("Tivoli Storage Manager", "TSM"),
    ("Rational ClearCase", "ClearCase"),
]

PROBLEMS = [
    ("SSL handshake fails after certificate renewal",
     "Clients log SSLHandshakeException: PKIX path building failed after the keystore was renewed.",
     "The new certificate chain does not include the intermediate CA certificate.",
     "Import the intermediate certificate into the truststore with ikeyman and restart the server."),
    ("Out of memory errors during nightly batch",
     "The JVM writes heapdump and javacore files and stops with java.lang.OutOfMemoryError at 02:00.",
     "The batch job caches every result row, so the heap grows past -Xmx.",
     "Raise the maximum heap to 4096 MB and enable pagination in the batch configuration."),
    ("Transaction log full error SQL0964C",
     "Applications receive SQL0964C and the database stops accepting updates.",
     "Long running transactions hold the primary log files open.",
     "Increase LOGSECOND to 40 and commit the import job every 1000 rows."),
    ("Queue manager does not start after upgrade",
     "strmqm returns AMQ5615 and the queue manager ends immediately after the fix pack upgrade.",
     "The qm.ini file still references the removed exit library.",
     "Remove the stale ApiExitLocal stanza from qm.ini and run strmqm again."),
    ("Backup schedule misses its window",
     "Scheduled incremental backups show status Missed in the event log.",
     "The client scheduler service runs with the wrong option file.",
     "Point the scheduler service at dsm.opt with dsmcutil update and restart the service."),
    ("Checkout hangs on dynamic view",
     "cleartool checkout does not return and the view server process uses 100% CPU.",
     "A corrupted view database index causes an endless lookup.",
     "Run recoverview -vob against the view and then reformatview."),
    ("Slow response after enabling tracing",
     "Page response time rises from 200 ms to 9 seconds after trace is enabled.",
     "The trace specification *=all writes every event to disk synchronously.",
     "Set the trace specification to *=info and restrict detail tracing to the failing component."),
    ("Login fails with LDAP error code 49",
     "Users cannot log in and SystemOut.log shows LDAP: error code 49 - Invalid Credentials.",
     "The bind password stored for the federated repository expired.",
     "Update the bind password in the federated repository settings and synchronize the nodes."),
]

MINOR = ["Related information", "Environment", "Product Alias"]


def technote(i, rng):
    product, alias = PRODUCTS[i % len(PRODUCTS)]
    title, symptom, cause, fix = PROBLEMS[i % len(PROBLEMS)]
    title = f"{alias}: {title}"
    markdown = i % 2 == 0
    sections = []
    if i % 3 == 0:
        sections.append(("", f"Technote {1000 + i} for {product}."))
    problem_heading = ["Problem", "Question", "Abstract", "Symptom"][i % 4]
    sections.append((problem_heading, f"{symptom} Affected release {7 + i % 3}.{i % 5}."))
    if i % 4 == 1:
        sections.append(("Environment", f"{product} {7 + i % 3}.{i % 5} on Linux x86-64."))
    if i in (7, 15):  # no solution section: skipped by the generator
        sections.append(("Related Information", "See the product documentation."))
    else:
        sections.append(("Cause", cause))
        solution_heading = ["Resolving the Problem", "Resolution", "Answer", "Fix"][i % 4]
        sections.append((solution_heading, fix))
    if rng.random() < 0.5:
        sections.append((rng.choice(MINOR), f"{product} support portal, document {rng.randint(100000, 999999)}."))
    parts = []
    for heading, body in sections:
        if not heading:
            parts.append(body)
        elif markdown:
            parts.append(f"## {heading}\n{body}")
        else:
            parts.append(f"{heading}\n\n{body}")
    return {"doc_id": f"swg{21000000 + i * 37}", "title": title, "text": "\n\n".join(parts) + "\n"}


def posts(rng):
    rows = []
    post_id = 100
    questions = []
    for q in range(10):
        qid = post_id
        post_id += 1
        title, symptom, _, fix = PROBLEMS[q % len(PROBLEMS)]
        answers = []
        for a in range(2 if q != 3 else 1):
            aid = post_id
            post_id += 1
            body = (f"<p>{fix}</p>" if a == 0 else
                    f"<p>Have you checked the logs? Try <code>grep -i error SystemOut.log</code> &amp; post the output.</p>")
            answers.append((aid, body))
        accepted = answers[0][0]
        if q == 5:
            accepted = None  # no accepted answer
        if q == 8:
            accepted = 9999  # refers to a post missing from the dump
        questions.append((qid, title, symptom, accepted, answers))
    for qid, title, symptom, accepted, answers in questions:
        attrs = {"Id": qid, "PostTypeId": 1, "Title": title,
                 "Body": f"<p>{symptom}</p>\n<pre><code>rc=8\n</code></pre>"}
        if accepted is not None:
            attrs["AcceptedAnswerId"] = accepted
        rows.append(attrs)
        for aid, body in answers:
            rows.append({"Id": aid, "PostTypeId": 2, "ParentId": qid, "Body": body})
    while len(rows) < 30:
        rows.append({"Id": post_id, "PostTypeId": 5, "Body": "<p>Tag wiki excerpt.</p>"})
        post_id += 1
    assert len(rows) == 30, len(rows)
    lines = ['<?xml version="1.0" encoding="utf-8"?>', "<posts>"]
    for attrs in rows:
        lines.append("  <row " + " ".join(f"{k}={quoteattr(str(v))}" for k, v in attrs.items()) + " />")
    lines.append("</posts>")
    return "\n".join(lines) + "\n"


def pre_tokens(text):
    return re.findall(r"[^\W_]+|[^\w\s]+|_+", text)


def train_bpe(words, num_merges):
    """Plain frequency-based BPE; ties broken by the lexicographically smaller pair."""
    vocab = collections.Counter()
    for w in words:
        vocab[tuple(w)] += 1
    pieces = sorted({c for w in vocab for c in w})
    merges = []
    for _ in range(num_merges):
        pairs = collections.Counter()
        for w, n in vocab.items():
            for a, b in zip(w, w[1:]):
                pairs[(a, b)] += n
        if not pairs:
            break
        best = min(pairs.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        if pairs[best] < 2:
            break
        merges.append(list(best))
        pieces.append(best[0] + best[1])
        merged = collections.Counter()
        for w, n in vocab.items():
            out, i = [], 0
            while i < len(w):
                if i + 1 < len(w) and (w[i], w[i + 1]) == best:
                    out.append(w[i] + w[i + 1])
                    i += 2
                else:
                    out.append(w[i])
                    i += 1
            merged[tuple(out)] += n
        vocab = merged
    return {"pieces": ["[UNK]"] + pieces, "merges": merges, "protected": [], "unk_piece": "[UNK]"}


def main():
    rng = random.Random(20200711)
    OUT.mkdir(parents=True, exist_ok=True)
    docs = [technote(i, rng) for i in range(20)]
    with open(OUT / "docs.jsonl", "w", encoding="utf-8") as f:
        for d in docs:
            f.write(json.dumps(d, ensure_ascii=False) + "\n")
    (OUT / "Posts.xml").write_text(posts(rng), encoding="utf-8")

    words = [w for d in docs for w in pre_tokens(d["title"] + "\n" + d["text"])]
    (OUT / "vocab.json").write_text(json.dumps(train_bpe(words, 120), ensure_ascii=False) + "\n",
                                    encoding="utf-8")

    (OUT / "sections.json").write_text(json.dumps({
        "problem_headings": ["Abstract", "Error Description", "Question", "Symptom", "Problem"],
        "solution_headings": ["Cause", "Resolving the Problem", "Resolution", "Answer", "Fix"],
    }, indent=2) + "\n")
    (OUT / "augment_plan.json").write_text(json.dumps({
        "factor": 10,
        "strategies": [
            {"kind": "query_truncate", "fraction": 0.5},
            {"kind": "word_dropout", "rate": 0.1},
            {"kind": "stopword_removal", "stopword_list": "en"},
            {"kind": "title_drop"},
            {"kind": "duplicate_positive"},
        ],
    }, indent=2) + "\n")

    queries, qrels = [], []
    for i, d in enumerate(docs[:12]):
        qid = f"q{i:02d}"
        problem = PROBLEMS[i % len(PROBLEMS)]
        queries.append(f"{qid}\t{problem[0]} {PRODUCTS[i % len(PRODUCTS)][1]}")
        qrels.append(f"{qid}\t{d['doc_id']}")
    queries.append("q99\tlicense key rejected by installer")
    qrels.append("q99\t")
    (OUT / "queries.tsv").write_text("\n".join(queries) + "\n")
    (OUT / "qrels.tsv").write_text("\n".join(qrels) + "\n")

    golds = {"rc-a": "Import the intermediate certificate into the truststore",
             "rc-b": "Raise the maximum heap to 4096 MB",
             "rc-c": "", "rc-d": ""}
    preds = {"rc-a": "import the intermediate certificate",
             "rc-b": "Raise the maximum heap to 4096 MB",
             "rc-c": "", "rc-d": "restart the server"}
    (OUT / "rc_golds.json").write_text(json.dumps(golds, indent=2) + "\n")
    (OUT / "rc_predictions.json").write_text(json.dumps(preds, indent=2) + "\n")


if __name__ == "__main__":
    main()

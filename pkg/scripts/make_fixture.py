"""Regenerate the bundled Posts.xml / Users.xml test fixture.

Builds a small synthetic dump: 200 retained questions tagged java or
javascript (2014..2016), each with one accepted answer and at least one
competitor, plus decoy rows for every discard rule.  Accepted answers
are written with a planted advantage (faster, higher reputation, more
overlap with the question, more code) so trained models have signal to
find.  Fully seeded; reruns are byte-identical.

Usage: python scripts/make_fixture.py [out_dir]
"""

from __future__ import annotations

import sys
from pathlib import Path
from xml.sax.saxutils import quoteattr

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from soaccept.ingest import IngestFilter, build_dataset, decode_post, decode_user, stream_rows

SEED = 20140601
DAY = 86_400_000
HOUR = 3_600_000

VERBS = ["sort", "parse", "merge", "filter", "format", "cache", "validate",
         "serialize", "deduplicate", "paginate", "escape", "compress"]
JAVA_OBJECTS = ["a HashMap by value", "dates from a CSV file", "nested JSON payloads",
                "a LinkedList in place", "large XML documents", "BigDecimal amounts",
                "thread pool results", "JDBC result sets", "enum constants",
                "classpath resources", "byte buffers", "property files"]
JS_OBJECTS = ["an array of objects", "query string parameters", "nested promises",
              "DOM event handlers", "JSON from fetch", "dates without libraries",
              "a deeply nested object", "form input values", "regex capture groups",
              "localStorage entries", "duplicate array entries", "CSS class lists"]
JAVA_APIS = ["Collections.sort", "SimpleDateFormat", "StringBuilder", "Streams",
             "Jackson", "TreeMap", "Optional", "CompletableFuture"]
JS_APIS = ["Array.prototype.reduce", "Object.entries", "Promise.all", "URLSearchParams",
           "Array.from", "JSON.parse", "addEventListener", "Map"]
FILLER = ["I tried the obvious loop but it gets slow on larger inputs.",
          "The documentation was not much help here.",
          "This runs inside a scheduled job, so correctness matters.",
          "My current attempt throws on the first malformed entry.",
          "I would prefer to avoid extra dependencies.",
          "The same code works fine on a small sample."]
ANSWER_FILLER = ["Be careful with empty inputs.",
                 "This keeps the original order stable.",
                 "Measured on a million entries it stays fast.",
                 "The edge case is an empty collection.",
                 "You can inline this as a helper method.",
                 "Remember to handle null before the call."]
JAVA_CODE = ["Map<String, Integer> counts = new HashMap<>();\nfor (String key : keys) {{\n    counts.merge(key, 1, Integer::sum);\n}}",
             "List<String> out = items.stream()\n    .filter(s -> !s.isEmpty())\n    .sorted()\n    .collect(Collectors.toList());",
             "SimpleDateFormat fmt = new SimpleDateFormat(\"yyyy-MM-dd\");\nDate when = fmt.parse(raw);",
             "StringBuilder sb = new StringBuilder();\nfor (String part : parts) sb.append(part).append(',');"]
JS_CODE = ["const grouped = rows.reduce((acc, row) => {{\n  (acc[row.key] ||= []).push(row);\n  return acc;\n}}, {{}});",
           "const params = new URLSearchParams(location.search);\nconst page = Number(params.get('page') || 1);",
           "const unique = [...new Map(items.map(x => [x.id, x])).values()];",
           "document.querySelector('#form').addEventListener('submit', (e) => {{\n  e.preventDefault();\n}});"]


def iso(ms: int) -> str:
    from soaccept.ingest import format_timestamp

    return format_timestamp(ms)[:-1]  # dumps carry no trailing Z


class Fixture:
    def __init__(self):
        self.rng = np.random.default_rng(SEED)
        self.posts: list[dict] = []
        self.users: dict[int, dict] = {}
        self.next_post = 1
        self.next_user = 1

    def pick(self, seq):
        return seq[int(self.rng.integers(len(seq)))]

    def new_user(self, created_ms: int, reputation: int) -> int:
        uid = self.next_user
        self.next_user += 1
        self.users[uid] = {
            "Id": str(uid),
            "Reputation": str(int(reputation)),
            "CreationDate": iso(int(created_ms)),
            "DisplayName": f"user{uid}",
        }
        return uid

    def question_body(self, lang: str, task: str) -> str:
        parts = [f"<p>I need to {task} in {lang}. {self.pick(FILLER)}</p>"]
        if self.rng.random() < 0.5:
            code = self.pick(JAVA_CODE if lang == "java" else JS_CODE)
            parts.append(f"<pre><code>{code}</code></pre>")
        parts.append("<p>What is the idiomatic way to do this?</p>")
        return "".join(parts)

    def answer_body(self, lang: str, task: str, echo: bool, strong: bool) -> str:
        api = self.pick(JAVA_APIS if lang == "java" else JS_APIS)
        if echo:
            lead = f"<p>You can {task} with <code>{api}</code>. {self.pick(ANSWER_FILLER)}</p>"
        else:
            lead = f"<p>Try <code>{api}</code> for this. {self.pick(ANSWER_FILLER)}</p>"
        parts = [lead]
        code_p = 0.85 if strong else 0.45
        if self.rng.random() < code_p:
            code = self.pick(JAVA_CODE if lang == "java" else JS_CODE)
            parts.append(f"<pre><code>{code}</code></pre>")
        if self.rng.random() < (0.3 if strong else 0.15):
            parts.append(
                f'<p>See <a href="https://example.com/{lang}/{api.lower()}">the reference</a> for details.</p>'
            )
        if strong and self.rng.random() < 0.6:
            parts.append(f"<p>{self.pick(ANSWER_FILLER)}</p>")
        return "".join(parts)

    def add_post(self, **attrs) -> int:
        pid = self.next_post
        self.next_post += 1
        self.posts.append({"Id": str(pid), **attrs})
        return pid

    def add_question(self, created_ms: int, lang: str, task: str, owner: int,
                     tags=None) -> int:
        tag_str = "".join(f"<{t}>" for t in (tags or [lang]))
        return self.add_post(
            PostTypeId="1",
            CreationDate=iso(created_ms),
            Score=str(int(self.rng.integers(0, 12))),
            ViewCount=str(int(self.rng.integers(60, 20000))),
            Body=self.question_body(lang, task),
            OwnerUserId=str(owner),
            Tags=tag_str,
            Title=f"How to {task} in {lang}?",
            CommentCount=str(int(self.rng.integers(0, 4))),
        )

    def add_answer(self, qid: int, created_ms: int, body: str, owner: int | None,
                   score: int, comments: int) -> int:
        attrs = {
            "PostTypeId": "2",
            "ParentId": str(qid),
            "CreationDate": iso(created_ms),
            "Score": str(int(score)),
            "Body": body,
            "CommentCount": str(int(comments)),
        }
        if owner is not None:
            attrs["OwnerUserId"] = str(owner)
        return self.add_post(**attrs)

    def answer_owner(self, answer_ms: int, strong: bool) -> int:
        # accepted answerers skew to older, higher-reputation accounts
        if strong:
            rep = int(self.rng.lognormal(8.3, 0.9))
            age = self.rng.integers(200 * DAY, 2500 * DAY)
        else:
            rep = int(self.rng.lognormal(5.8, 1.3))
            age = self.rng.integers(5 * DAY, 1200 * DAY)
        return self.new_user(max(0, answer_ms - int(age)), max(1, rep))

    def retained_question(self, created_ms: int):
        lang = self.pick(["java", "javascript"])
        task = f"{self.pick(VERBS)} {self.pick(JAVA_OBJECTS if lang == 'java' else JS_OBJECTS)}"
        asker = self.new_user(created_ms - int(self.rng.integers(10, 1500)) * DAY,
                              int(self.rng.lognormal(5.0, 1.5)))
        qid = self.add_question(created_ms, lang, task, asker)
        n_answers = int(self.rng.choice([2, 3, 3, 4, 4, 5, 6]))
        accepted_pos = int(self.rng.integers(n_answers))
        answer_ids = []
        for j in range(n_answers):
            strong = j == accepted_pos
            # planted gap with overlap: accepted answers tend to come sooner
            if strong:
                lag = int(self.rng.integers(4 * 60_000, 10 * HOUR))
                score = int(self.rng.integers(2, 40))
                echo = self.rng.random() < 0.9
            else:
                lag = int(self.rng.integers(20 * 60_000, 5 * DAY))
                score = int(self.rng.integers(0, 9))
                echo = self.rng.random() < 0.25
            a_ms = created_ms + lag
            owner = self.answer_owner(a_ms, strong)
            aid = self.add_answer(
                qid, a_ms, self.answer_body(lang, task, echo, strong), owner,
                score, int(self.rng.integers(0, 5)),
            )
            answer_ids.append(aid)
        self.posts[qid - 1]["AcceptedAnswerId"] = str(answer_ids[accepted_pos])
        self.posts[qid - 1]["AnswerCount"] = str(n_answers)

    def simple_answers(self, qid: int, created_ms: int, lang: str, task: str,
                       n: int, owners: list):
        ids = []
        for j in range(n):
            a_ms = created_ms + int(self.rng.integers(HOUR, 2 * DAY))
            owner = owners[j] if j < len(owners) else self.answer_owner(a_ms, False)
            ids.append(self.add_answer(qid, a_ms, self.answer_body(lang, task, False, False),
                                       owner, int(self.rng.integers(0, 6)),
                                       int(self.rng.integers(0, 3))))
        return ids

    def decoys(self, base_ms: int):
        rng = self.rng
        # wrong tag
        for i in range(3):
            ms = base_ms + i * 3 * DAY
            asker = self.new_user(ms - 100 * DAY, 300)
            qid = self.add_question(ms, "javascript", "profile a slow loop", asker,
                                    tags=["python", "pandas"])
            ids = self.simple_answers(qid, ms, "javascript", "profile a slow loop", 2, [])
            self.posts[qid - 1]["AcceptedAnswerId"] = str(ids[0])
        # out-of-range years
        for ms in (self.ts(2013, 5, 2), self.ts(2017, 3, 9), self.ts(2012, 11, 21)):
            asker = self.new_user(ms - 50 * DAY, 200)
            qid = self.add_question(ms, "java", "read a file line by line", asker)
            ids = self.simple_answers(qid, ms, "java", "read a file line by line", 2, [])
            self.posts[qid - 1]["AcceptedAnswerId"] = str(ids[0])
        # no accepted answer
        for i in range(2):
            ms = base_ms + (10 + i) * DAY
            asker = self.new_user(ms - 80 * DAY, 150)
            qid = self.add_question(ms, "javascript", "debounce a resize handler", asker)
            self.simple_answers(qid, ms, "javascript", "debounce a resize handler", 3, [])
        # accepted answer from an unregistered owner
        for i in range(2):
            ms = base_ms + (14 + i) * DAY
            asker = self.new_user(ms - 60 * DAY, 90)
            qid = self.add_question(ms, "java", "trim trailing whitespace", asker)
            ids = self.simple_answers(qid, ms, "java", "trim trailing whitespace", 2,
                                      [None])
            self.posts[qid - 1]["AcceptedAnswerId"] = str(ids[0])
        # self-answered and accepted
        ms = base_ms + 20 * DAY
        asker = self.new_user(ms - 400 * DAY, 2000)
        qid = self.add_question(ms, "javascript", "retry a failed fetch", asker)
        ids = self.simple_answers(qid, ms, "javascript", "retry a failed fetch", 2,
                                  [asker])
        self.posts[qid - 1]["AcceptedAnswerId"] = str(ids[0])
        # accepted answer whose owner is missing from the users file
        ms = base_ms + 22 * DAY
        asker = self.new_user(ms - 30 * DAY, 70)
        qid = self.add_question(ms, "java", "copy an array slice", asker)
        ghost = 99_901
        ids = self.simple_answers(qid, ms, "java", "copy an array slice", 2, [ghost])
        self.posts[qid - 1]["AcceptedAnswerId"] = str(ids[0])
        # accepted answer kept but no surviving competitor
        for i in range(2):
            ms = base_ms + (24 + i) * DAY
            asker = self.new_user(ms - 90 * DAY, 500)
            qid = self.add_question(ms, "javascript", "shuffle an array fairly", asker)
            keeper = self.answer_owner(ms + HOUR, False)
            ids = self.simple_answers(qid, ms, "javascript", "shuffle an array fairly",
                                      2, [keeper, None])
            self.posts[qid - 1]["AcceptedAnswerId"] = str(ids[0])
        # non-question, non-answer rows
        for i in range(3):
            self.add_post(PostTypeId=str(4 + i),
                          CreationDate=iso(base_ms + i * DAY),
                          Body="<p>tag wiki stub</p>")

    @staticmethod
    def ts(year: int, month: int, day: int) -> int:
        import calendar

        return calendar.timegm((year, month, day, 0, 0, 0)) * 1000

    def build(self):
        start = self.ts(2014, 1, 6)
        span = self.ts(2016, 12, 20) - start
        offsets = np.sort(self.rng.integers(0, span, size=200))
        for k, off in enumerate(offsets):
            ms = int(start + off) + int(self.rng.integers(0, DAY))
            self.retained_question(ms)
        self.decoys(self.ts(2015, 6, 1))
        # two answers predate their question: dropped at extraction time
        anomaly = [p for p in self.posts
                   if p["PostTypeId"] == "1" and "AcceptedAnswerId" in p
                   and p.get("Tags", "").count("<java>")][:2]
        for q in anomaly:
            q_ms = self.parse_ms(q["CreationDate"])
            owner = self.answer_owner(q_ms, False)
            self.add_answer(int(q["Id"]), q_ms - 2 * HOUR,
                            "<p>Posted from a machine with a skewed clock.</p>",
                            owner, 0, 0)
        # two answerers whose accounts are newer than their answer
        fresh = [p for p in self.posts if p["PostTypeId"] == "2"
                 and p.get("OwnerUserId")][:2]
        for a in fresh:
            uid = int(a["OwnerUserId"])
            self.users[uid]["CreationDate"] = iso(self.parse_ms(a["CreationDate"]) + 3 * DAY)

    @staticmethod
    def parse_ms(text: str) -> int:
        from soaccept.ingest import parse_timestamp

        return parse_timestamp(text)

    def write(self, out_dir: Path):
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "Posts.xml", "w", encoding="utf-8", newline="\n") as fh:
            fh.write('<?xml version="1.0" encoding="utf-8"?>\n<posts>\n')
            for attrs in self.posts:
                pairs = " ".join(f"{k}={quoteattr(v)}" for k, v in attrs.items())
                fh.write(f"  <row {pairs} />\n")
            fh.write("</posts>\n")
        with open(out_dir / "Users.xml", "w", encoding="utf-8", newline="\n") as fh:
            fh.write('<?xml version="1.0" encoding="utf-8"?>\n<users>\n')
            for uid in sorted(self.users):
                pairs = " ".join(f"{k}={quoteattr(v)}" for k, v in self.users[uid].items())
                fh.write(f"  <row {pairs} />\n")
            fh.write("</users>\n")


def main():
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parent.parent / "tests" / "fixtures"
    )
    fx = Fixture()
    fx.build()
    fx.write(out_dir)

    posts = []
    with open(out_dir / "Posts.xml", "rb") as fh:
        for attrs in stream_rows(fh):
            posts.append(decode_post(attrs))
    users = {}
    with open(out_dir / "Users.xml", "rb") as fh:
        for attrs in stream_rows(fh):
            row = decode_user(attrs)
            users[row.id] = row
    flt = IngestFilter(tags_any_of=frozenset({"java", "javascript"}),
                       year_range=(2014, 2016))
    records, report = build_dataset(posts, users, flt)
    assert report["questions_retained"] == 200, report
    print(f"posts={len(posts)} users={len(users)}")
    print(report)


if __name__ == "__main__":
    main()

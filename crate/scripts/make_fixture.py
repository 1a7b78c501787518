#!/usr/bin/env python3
"""Builds the bundled test fixture in the upstream dataset layout.

Writes crates/gdr/tests/fixtures/mdd_docs.json and mdd_dials.json: two
domains, seven documents with title/paragraph/list mark-up spans, URLs and
hyperlinks, and a handful of dialogues with dialogue acts and grounding
references. Span offsets are computed, never hand-counted.
"""

import json
import os

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "crates", "gdr", "tests", "fixtures")


class DocBuilder:
    def __init__(self, doc_id, title, url=None, hyperlinks=None):
        self.doc_id = doc_id
        self.title = title
        self.url = url
        self.hyperlinks = hyperlinks or []
        self.text = ""
        self.spans = {}
        self.next_id = 1
        self.current_titles = []  # list of (level, title)

    def _add_span(self, tag, content, title="", parent_titles=None):
        start = len(self.text)
        self.text += content
        end = len(self.text)
        sid = str(self.next_id)
        self.next_id += 1
        self.spans[sid] = {
            "id_sp": sid,
            "tag": tag,
            "start_sp": start,
            "end_sp": end,
            "text_sp": content,
            "title": title,
            "parent_titles": [{"text": t} for t in (parent_titles or [])],
        }
        self.text += "\n"
        return sid

    def heading(self, level, title):
        self.current_titles = self.current_titles[: level - 1] + [title]
        self._add_span(f"h{level}", title, title=title, parent_titles=self.current_titles[:-1])

    def para(self, content):
        return self._add_span(
            "p", content, title=self.current_titles[-1] if self.current_titles else "",
            parent_titles=self.current_titles[:-1],
        )

    def list_block(self, items):
        # One ul span covering all items, plus one li span per item.
        start = len(self.text)
        rendered = "\n".join(f"* {item}" for item in items)
        parent = self.current_titles[:-1]
        title = self.current_titles[-1] if self.current_titles else ""
        ul_sid = str(self.next_id)
        self.next_id += 1
        self.text += rendered
        self.spans[ul_sid] = {
            "id_sp": ul_sid,
            "tag": "ul",
            "start_sp": start,
            "end_sp": len(self.text),
            "text_sp": rendered,
            "title": title,
            "parent_titles": [{"text": t} for t in parent],
        }
        # li spans inside.
        offset = start
        for item in items:
            line = f"* {item}"
            sid = str(self.next_id)
            self.next_id += 1
            self.spans[sid] = {
                "id_sp": sid,
                "tag": "li",
                "start_sp": offset,
                "end_sp": offset + len(line),
                "text_sp": line,
                "title": title,
                "parent_titles": [{"text": t} for t in parent],
            }
            offset += len(line) + 1
        self.text += "\n"
        return ul_sid

    def build(self):
        doc = {
            "doc_id": self.doc_id,
            "title": self.title,
            "doc_text": self.text,
            "spans": self.spans,
        }
        if self.url:
            doc["url"] = self.url
        if self.hyperlinks:
            doc["hyperlinks"] = self.hyperlinks
        return doc


def ssa_docs():
    docs = []

    d = DocBuilder(
        "Disability Benefits Overview#1_0",
        "Disability Benefits Overview",
        url="https://ssa.example.gov/benefits/disability-overview",
        hyperlinks=["Benefits For Children#1_0"],
    )
    d.heading(1, "Understanding Disability Benefits")
    d.para(
        "Disability benefits support workers who can no longer hold a job because of "
        "a medical condition that is expected to last at least one year. The monthly "
        "payment amount depends on your average lifetime earnings before the "
        "disability began."
    )
    d.heading(2, "Who Can Apply")
    d.para(
        "You can apply if you have worked in jobs covered by the program and your "
        "medical condition meets the strict definition of disability. Benefits "
        "usually continue until you are able to work again on a regular basis."
    )
    d.list_block(
        [
            "You must have worked recently enough to be insured.",
            "Your condition must prevent substantial gainful activity.",
            "Your condition must be expected to last twelve months or longer.",
        ]
    )
    d.heading(2, "How Payments Work")
    d.para(
        "After your application is approved, there is a five month waiting period "
        "before the first payment arrives. Payments are deposited each month and "
        "you will receive a letter that explains the exact amount."
    )
    docs.append(d)

    d = DocBuilder(
        "Benefits For Children#1_0",
        "Benefits For Children",
        url="https://ssa.example.gov/benefits/children",
        hyperlinks=["Disability Benefits Overview#1_0"],
    )
    d.heading(1, "Benefits For Your Children")
    d.para(
        "When you qualify for retirement or disability benefits, your children may "
        "also receive payments on your record. A child must be unmarried and "
        "younger than eighteen, or up to nineteen if still in secondary school."
    )
    d.heading(2, "Qualification")
    d.para(
        "To receive benefits on your record, the child must be your biological "
        "child, an adopted child, or a dependent stepchild. In some situations a "
        "grandchild who lives with you may also qualify for the monthly payment."
    )
    d.heading(2, "Payment Amounts")
    d.para(
        "Each qualified child may receive up to one half of your full benefit "
        "amount, subject to a family maximum that caps the combined payments to "
        "everyone receiving benefits on one earnings record."
    )
    docs.append(d)

    d = DocBuilder(
        "Applying Online#1_0",
        "Applying Online",
        url="https://ssa.example.gov/apply/online",
    )
    d.heading(1, "Apply For Benefits Online")
    d.para(
        "The online application is the most convenient way to apply. You can start "
        "your application, save your progress, and return later to finish it. Most "
        "people complete the form in less than thirty minutes."
    )
    d.heading(2, "What You Need")
    d.list_block(
        [
            "Your social security number and birth certificate.",
            "Names and dosages of any medicine you take.",
            "Contact information for your doctors and clinics.",
            "A summary of where you worked in the last fifteen years.",
        ]
    )
    d.heading(2, "After You Apply")
    d.para(
        "We review the application and contact you if more documents are needed. "
        "You can check the status of your claim online at any time using your "
        "personal account page."
    )
    docs.append(d)

    d = DocBuilder(
        "Retirement Questions#1_0",
        "Retirement Questions",
        url="https://ssa.example.gov/apply/retirement-faq",
    )
    d.heading(1, "Common Retirement Questions")
    d.para(
        "Your retirement benefit is based on your highest thirty five years of "
        "earnings. Claiming before your full retirement age permanently reduces "
        "the monthly amount, while waiting past it increases the payment."
    )
    d.heading(2, "Working While Retired")
    d.para(
        "You can work while receiving retirement benefits. If you are younger than "
        "full retirement age, earnings above the annual limit temporarily reduce "
        "your payments until you reach that age."
    )
    docs.append(d)

    return [d.build() for d in docs]


def dmv_docs():
    docs = []

    d = DocBuilder(
        "License Renewal#2_0",
        "License Renewal",
        url="https://dmv.example.gov/licenses/renewal",
        hyperlinks=["Real ID Basics#2_0"],
    )
    d.heading(1, "Renewing Your Driver License")
    d.para(
        "Most drivers can renew a license online up to one year before it expires. "
        "The renewed card arrives by mail within three weeks. A vision test is "
        "required only when you renew in person at an office."
    )
    d.heading(2, "Renewal Fees")
    d.para(
        "The standard renewal fee covers eight years. Drivers older than "
        "sixty nine renew for four years at a reduced fee. A late renewal adds a "
        "small penalty unless you were deployed or living abroad."
    )
    docs.append(d)

    d = DocBuilder(
        "Real ID Basics#2_0",
        "Real ID Basics",
        url="https://dmv.example.gov/licenses/real-id",
        hyperlinks=[],
    )
    d.heading(1, "What Is A Real ID")
    d.para(
        "A Real ID is a license or identification card that meets federal security "
        "standards. Starting with the enforcement date, a standard card will no "
        "longer be accepted to board domestic flights."
    )
    d.heading(2, "Documents To Bring")
    d.list_block(
        [
            "One proof of identity such as a passport or birth certificate.",
            "Two different documents that prove your residential address.",
            "Proof of your social security number.",
        ]
    )
    docs.append(d)

    d = DocBuilder(
        "Vehicle Registration#2_0",
        "Vehicle Registration",
        url="https://dmv.example.gov/vehicles/registration",
    )
    d.heading(1, "Registering A Vehicle")
    d.para(
        "New residents must register their vehicle within sixty days of moving. "
        "Bring the existing title, proof of insurance, and a completed application "
        "to any office, or mail the documents to the central processing center."
    )
    d.heading(2, "Inspections")
    d.para(
        "A safety inspection is required before the first registration and every "
        "two years afterwards. Emissions testing applies only in the counties "
        "listed on the inspection page."
    )
    docs.append(d)

    return [d.build() for d in docs]


def find_span(doc, index):
    return list(doc["spans"].keys())[index]


def make_dialogue(dial_id, doc, qa, extra_user_da=None):
    """qa: list of (user_utterance, agent_utterance, span_id)."""
    turns = []
    turn_id = 1
    for i, (user, agent, span) in enumerate(qa):
        user_da = "query_solution"
        if extra_user_da and i in extra_user_da:
            user_da = extra_user_da[i]
        turns.append(
            {
                "turn_id": turn_id,
                "role": "user",
                "da": user_da,
                "utterance": user,
                "references": [{"id_sp": span, "doc_id": doc["doc_id"]}],
            }
        )
        turn_id += 1
        turns.append(
            {
                "turn_id": turn_id,
                "role": "agent",
                "da": "respond_solution",
                "utterance": agent,
                "references": [{"id_sp": span, "doc_id": doc["doc_id"]}],
            }
        )
        turn_id += 1
    return {"dial_id": dial_id, "turns": turns}


def main():
    ssa = ssa_docs()
    dmv = dmv_docs()
    doc_data = {
        "ssa": {d["doc_id"]: d for d in ssa},
        "dmv": {d["doc_id"]: d for d in dmv},
    }

    overview, children, online, faq = ssa
    renewal, realid, registration = dmv

    ssa_dials = [
        make_dialogue(
            "ssa-dial-1",
            overview,
            [
                (
                    "Hi, I had to stop working last spring. Can I get disability payments?",
                    "You can receive disability benefits when a medical condition keeps you from working for at least a year.",
                    "2",
                ),
                (
                    "How much would the monthly check be?",
                    "The monthly payment depends on your average lifetime earnings before the disability began.",
                    "2",
                ),
                (
                    "Do I qualify if my job was part time?",
                    "You qualify if your jobs were covered by the program and your condition meets the definition of disability.",
                    "4",
                ),
                (
                    "Is there a waiting period before money arrives?",
                    "Yes, there is a five month waiting period after approval before the first payment arrives.",
                    "9",
                ),
            ],
        ),
        make_dialogue(
            "ssa-dial-2",
            children,
            [
                (
                    "My daughter is sixteen. Does she get anything from my record?",
                    "Children younger than eighteen who are unmarried may receive payments on your record.",
                    "2",
                ),
                (
                    "What about my stepson who lives with us?",
                    "A dependent stepchild can qualify, along with biological and adopted children.",
                    "4",
                ),
                (
                    "How much would each child receive?",
                    "Each qualified child may receive up to one half of your full benefit amount, within the family maximum.",
                    "6",
                ),
            ],
            extra_user_da={1: "query_condition"},
        ),
        make_dialogue(
            "ssa-dial-3",
            online,
            [
                (
                    "Can I file the whole application from home?",
                    "Yes, the online application lets you start, save your progress, and finish later.",
                    "2",
                ),
                (
                    "What paperwork should I gather first?",
                    "Have your social security number, birth certificate, medicine list and doctor contacts ready.",
                    "4",
                ),
                (
                    "How do I know if you need more from me?",
                    "We contact you if more documents are needed, and you can check your claim status online.",
                    "10",
                ),
            ],
        ),
        make_dialogue(
            "ssa-dial-4",
            faq,
            [
                (
                    "Does claiming early shrink my retirement check?",
                    "Claiming before your full retirement age permanently reduces the monthly amount.",
                    "2",
                ),
                (
                    "Can I keep my job and still collect?",
                    "You can work while receiving benefits, though earnings above the annual limit reduce payments before full retirement age.",
                    "4",
                ),
            ],
        ),
        make_dialogue(
            "ssa-dial-5",
            overview,
            [
                (
                    "What conditions count as a disability here?",
                    "Your condition must prevent substantial gainful activity and be expected to last twelve months or longer.",
                    "5",
                ),
                (
                    "And the payments keep coming how long?",
                    "Benefits usually continue until you are able to work again on a regular basis.",
                    "4",
                ),
            ],
        ),
        make_dialogue(
            "ssa-dial-6",
            children,
            [
                (
                    "Could my grandchild qualify under my benefits?",
                    "A grandchild who lives with you may qualify for the monthly payment in some situations.",
                    "4",
                ),
                (
                    "Is there a cap for the whole family?",
                    "Yes, a family maximum caps the combined payments on one earnings record.",
                    "6",
                ),
            ],
        ),
    ]

    dmv_dials = [
        make_dialogue(
            "dmv-dial-1",
            renewal,
            [
                (
                    "My license expires next month, can I renew it online?",
                    "Most drivers can renew online up to one year before the license expires.",
                    "2",
                ),
                (
                    "Will I need an eye exam?",
                    "A vision test is required only when you renew in person at an office.",
                    "2",
                ),
                (
                    "How much does the renewal cost?",
                    "The standard renewal fee covers eight years, with a reduced four year option for older drivers.",
                    "4",
                ),
            ],
        ),
        make_dialogue(
            "dmv-dial-2",
            realid,
            [
                (
                    "Do I need a Real ID to fly within the country?",
                    "After the enforcement date, a standard card will no longer be accepted for domestic flights.",
                    "2",
                ),
                (
                    "What documents do I bring to the office?",
                    "Bring proof of identity, two residency documents, and proof of your social security number.",
                    "4",
                ),
            ],
        ),
        make_dialogue(
            "dmv-dial-3",
            registration,
            [
                (
                    "I just moved here. When must my car be registered?",
                    "New residents must register their vehicle within sixty days of moving.",
                    "2",
                ),
                (
                    "Is an inspection part of that?",
                    "A safety inspection is required before the first registration and every two years afterwards.",
                    "4",
                ),
                (
                    "Does my county need an emissions test?",
                    "Emissions testing applies only in the counties listed on the inspection page.",
                    "4",
                ),
            ],
        ),
        make_dialogue(
            "dmv-dial-4",
            renewal,
            [
                (
                    "I renewed late because I was deployed. Is there a fine?",
                    "A late renewal adds a small penalty unless you were deployed or living abroad.",
                    "4",
                ),
                (
                    "How soon does the new card arrive?",
                    "The renewed card arrives by mail within three weeks.",
                    "2",
                ),
            ],
        ),
    ]

    dial_data = {"ssa": ssa_dials, "dmv": dmv_dials}

    os.makedirs(OUT_DIR, exist_ok=True)
    with open(os.path.join(OUT_DIR, "mdd_docs.json"), "w") as f:
        json.dump({"doc_data": doc_data}, f, indent=1, ensure_ascii=False)
        f.write("\n")
    with open(os.path.join(OUT_DIR, "mdd_dials.json"), "w") as f:
        json.dump({"dial_data": dial_data}, f, indent=1, ensure_ascii=False)
        f.write("\n")
    n_docs = sum(len(v) for v in doc_data.values())
    n_dials = sum(len(v) for v in dial_data.values())
    print(f"wrote {n_docs} docs, {n_dials} dialogues to {OUT_DIR}")


if __name__ == "__main__":
    main()

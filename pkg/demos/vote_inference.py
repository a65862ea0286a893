"""
Voting over grid positions inside a box
=======================================

When the object is off-centre in its box a single centroid marker can miss
it. Vote mode renders one marker per grid position, asks the model about
each image, and aggregates: either by a majority over matched categories or
by asking the model to summarise its own answers.
"""
import numpy as np

from pointprompt import BBox, EvalConfig, GridSpec, MockGateway, VoteConfig, vote_infer

image = np.zeros((120, 160, 3), np.uint8)
box = BBox(20, 10, 120, 100)
categories = ["person", "bicycle", "dog"]

# a fake model that only sees the dog when the marker is on the left half of the box
def responder(req):
    if req.request_id.endswith("/summary"):
        print("summary prompt:\n ", req.prompt)
        return "a dog"
    return "a dog" if req.request_id[-1] in "02" else "a bicycle wheel"

for aggregator in ("majority", "summarize"):
    cfg = EvalConfig(vote=VoteConfig(GridSpec("five-corner", margin_fraction=0.1), aggregator))
    session = vote_infer(image, box, cfg, MockGateway(responder=responder), categories, "box0")
    print(aggregator, "points:", [tuple(p) for p in session.points])
    print("  responses:", session.responses, "->", session.aggregated)

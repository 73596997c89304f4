#!/usr/bin/env python3
"""Convert an OSM extract (.osm.pbf) into buildings and walkways GeoJSON layers.

Building kinds come from building tags and from POI nodes inside the
footprint. Only the largest connected walkway component is kept, since the
simulator requires a connected network.

    python3 scripts/osm_to_layers.py city.osm.pbf outdir/
"""

import argparse
import json
import os
import sys

import osmium
from shapely.geometry import Point, Polygon
from shapely.strtree import STRtree

WALK_HIGHWAYS = {
    "footway", "pedestrian", "path", "steps", "living_street", "residential", "service",
    "unclassified", "tertiary", "tertiary_link", "secondary", "secondary_link",
    "primary", "primary_link", "cycleway", "corridor", "track",
}
FOOD = {"restaurant", "cafe", "fast_food", "pub", "bar", "food_court", "biergarten", "ice_cream"}
LEISURE_AMENITY = {"cinema", "theatre", "arts_centre", "library", "community_centre", "nightclub", "place_of_worship"}
RESIDENTIAL = {"residential", "apartments", "house", "detached", "terrace", "dormitory", "semidetached_house"}
WORK = {
    "commercial", "office", "retail", "industrial", "warehouse", "public", "civic", "government",
    "school", "university", "college", "hospital", "train_station", "transportation", "kindergarten",
    "hotel", "supermarket",
}
RECREATION_BUILDINGS = {"church", "cathedral", "chapel", "museum", "sports_hall", "stadium", "theatre"}


def poi_kind(tags):
    if tags.get("amenity") in FOOD:
        return "restaurant"
    if tags.get("amenity") in LEISURE_AMENITY or "leisure" in tags or tags.get("tourism") in {"museum", "gallery", "attraction"}:
        return "recreation"
    if "shop" in tags or "office" in tags or "craft" in tags:
        return "workplace"
    return None


class Reader(osmium.SimpleHandler):
    def __init__(self):
        super().__init__()
        self.pois = []
        self.buildings = []
        self.walkways = []

    def node(self, n):
        kind = poi_kind(n.tags)
        if kind and n.location.valid():
            self.pois.append((n.location.lon, n.location.lat, kind))

    def way(self, w):
        tags = {t.k: t.v for t in w.tags}
        try:
            coords = [(nd.lon, nd.lat) for nd in w.nodes]
            refs = [nd.ref for nd in w.nodes]
        except osmium.InvalidLocationError:
            return
        if "building" in tags:
            if len(refs) >= 4 and refs[0] == refs[-1]:
                self.buildings.append((w.id, tags, coords))
        elif tags.get("highway") in WALK_HIGHWAYS and tags.get("area") != "yes" and len(refs) >= 2:
            self.walkways.append((w.id, tags.get("highway"), refs, coords))


def building_kind(tags, inside):
    b = tags.get("building")
    own = poi_kind(tags)
    for k in ("restaurant", "recreation"):
        if own == k or k in inside:
            return k
    if b in RECREATION_BUILDINGS:
        return "recreation"
    if b in RESIDENTIAL:
        return "residential"
    if b in WORK or own == "workplace" or "workplace" in inside:
        return "workplace"
    return "residential"


def largest_component(walkways):
    parent = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for _, _, refs, _ in walkways:
        for a, b in zip(refs, refs[1:]):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
    sizes = {}
    for x in list(parent):
        r = find(x)
        sizes[r] = sizes.get(r, 0) + 1
    root = max(sizes, key=lambda r: (sizes[r], -r))
    return [w for w in walkways if find(w[2][0]) == root], sizes[root], len(sizes)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("pbf")
    ap.add_argument("out")
    args = ap.parse_args()

    r = Reader()
    r.apply_file(args.pbf, locations=True)

    polys = [Polygon(c) for _, _, c in r.buildings]
    tree = STRtree(polys)
    inside = [set() for _ in polys]
    for lon, lat, kind in r.pois:
        p = Point(lon, lat)
        for i in tree.query(p):
            if polys[i].contains(p):
                inside[i].add(kind)

    features = []
    counts = {}
    for i, ((osm_id, tags, coords), poly) in enumerate(zip(r.buildings, polys)):
        if not poly.is_valid or poly.area == 0:
            continue
        kind = building_kind(tags, inside[i])
        counts[kind] = counts.get(kind, 0) + 1
        features.append({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [[list(c) for c in coords]]},
            "properties": {"id": len(features) + 1, "kind": kind, "osm_id": osm_id},
        })

    kept, nodes, comps = largest_component(r.walkways)
    walk = [{
        "type": "Feature",
        "geometry": {"type": "LineString", "coordinates": [list(c) for c in coords]},
        "properties": {"osm_id": osm_id, "highway": hw},
    } for osm_id, hw, _, coords in kept]

    os.makedirs(args.out, exist_ok=True)
    for name, feats in (("buildings.geojson", features), ("walkways.geojson", walk)):
        with open(os.path.join(args.out, name), "w") as f:
            json.dump({"type": "FeatureCollection", "features": feats}, f, separators=(",", ":"))
            f.write("\n")
    print(f"buildings: {len(features)} {dict(sorted(counts.items()))}", file=sys.stderr)
    print(f"walkways: kept {len(kept)} of {len(r.walkways)} ways, {nodes} nodes, {comps} components before pruning", file=sys.stderr)


if __name__ == "__main__":
    main()

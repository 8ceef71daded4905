import csv
import random

import pytest

from resiscan.addrs import LongestPrefixMap, parse_address
from resiscan.classify import LABEL_EXTERNAL, LABEL_INTERNAL, ClassifiedAddress
from resiscan.fingerprint import FingerprintHit
from resiscan.grab import (
    OUTCOME_REFUSED,
    OUTCOME_RESPONDED,
    OUTCOME_TIMEOUT,
    GrabRecord,
)
from resiscan.report import (
    AsnGeoRecord,
    aggregate,
    emit,
    internal_only_exposures,
    load_asn_geo,
    yield_cdf,
)

NET_A1 = parse_address("2001:db8:a:100::")
NET_A2 = parse_address("2001:db8:a:200::")
NET_B1 = parse_address("2001:db8:b:300::")

A1_INT1 = parse_address("2001:db8:a:100::1")
A1_INT2 = parse_address("2001:db8:a:100::2")
A1_WAN = parse_address("3fff:a:0:1::7")
A2_WAN = parse_address("3fff:a:0:2::7")
B1_INT = parse_address("2001:db8:b:300::a")
B1_WAN = parse_address("3fff:b:0:3::7")


def internal(net56, address, distance):
    return ClassifiedAddress(net56, address, LABEL_INTERNAL, 64, distance)


def external(net56, address, distance):
    return ClassifiedAddress(net56, address, LABEL_EXTERNAL, 255, distance)


def hit(address, service, **kw):
    return GrabRecord(address=address, service=service, outcome=OUTCOME_RESPONDED, **kw)


CLASSIFIED = [
    internal(NET_A1, A1_INT1, 4),
    internal(NET_A1, A1_INT2, 5),
    external(NET_A1, A1_WAN, 3),
    external(NET_A2, A2_WAN, 2),
    internal(NET_B1, B1_INT, 6),
    external(NET_B1, B1_WAN, 6),
]

GRABS = [
    hit("2001:db8:a:100::1", "telnet"),
    hit("2001:db8:a:100::1", "http", http_server_header="BusyBox"),
    hit("2001:db8:a:100::2", "lockdown", lockdown_product_version="17.1"),
    hit("3fff:a:0:1::7", "http"),  # A1's outside address answers: not internal-only
    hit("2001:db8:b:300::a", "telnet"),
    hit("2001:db8:ff::1", "ntp"),  # responded, but never classified
    GrabRecord(address="3fff:b:0:3::7", service="lockdown", outcome=OUTCOME_TIMEOUT),
    GrabRecord(address="3fff:b:0:3::7", service="ssh", outcome=OUTCOME_REFUSED),
]

HITS = [
    FingerprintHit("2001:db8:a:100::1", "dahua_camera", "x"),
    FingerprintHit("2001:db8:b:300::a", "dahua_camera", "x"),
    FingerprintHit("3fff:a:0:1::7", "nokia_gateway", "Nokia DHBU Root CA"),
]


def build_lpm():
    table = LongestPrefixMap()
    table.insert("2001:db8:a::/48", AsnGeoRecord(64500, "Alpha Net", "de"))
    table.insert("2001:db8:b::/48", AsnGeoRecord(64501, "Beta Net", "fr"))
    table.insert("3fff:a::/32", AsnGeoRecord(64500, "Alpha Net", "de"))
    table.insert("3fff:b::/32", AsnGeoRecord(64501, "Beta Net", "fr"))
    return table


@pytest.fixture(scope="module")
def bundle():
    return aggregate(CLASSIFIED, GRABS, HITS, build_lpm(), seed_total=7)


class TestAggregate:
    def test_totals(self, bundle):
        assert bundle.total_internal == 3
        assert bundle.total_external == 3
        assert bundle.seed_total == 7

    def test_country_split(self, bundle):
        assert bundle.country_counts == {"de": [2, 2], "fr": [1, 1]}

    def test_asn_split(self, bundle):
        assert bundle.asn_counts == {64500: [2, 2], 64501: [1, 1]}
        assert bundle.asn_names == {64500: "Alpha Net", 64501: "Beta Net"}

    def test_yield_per_48(self, bundle):
        assert bundle.yield_stats == {
            parse_address("2001:db8:a::"): [2, 2],
            parse_address("2001:db8:b::"): [1, 1],
        }

    def test_iid_histogram(self, bundle):
        expected = {n: 0 for n in range(1, 11)}
        expected[1] = expected[2] = expected[10] = 1
        assert bundle.iid_hist == expected

    def test_delta_histogram(self, bundle):
        # A1: 4-3 and 5-3; A2 has no internal; B1: 6-6.
        assert bundle.delta_hist == {0: 1, 1: 1, 2: 1}
        assert bundle.total_pairs == 3

    def test_protocol_split(self, bundle):
        assert bundle.protocol_split["telnet"] == [2, 0]
        assert bundle.protocol_split["http"] == [1, 1]
        assert bundle.protocol_split["lockdown"] == [1, 0]
        assert bundle.protocol_split["ssh"] == [0, 0]  # refused grabs don't count
        assert bundle.protocol_split["ntp"] == [0, 0]  # unclassified address
        assert len(bundle.protocol_split) == 25  # every configured service has a row

    def test_distinct_ports(self, bundle):
        # ::1 answered on {23,80}; the WAN, ::2, ::a and the stray on one each.
        assert bundle.distinct_ports_hist == {1: 4, 2: 1}

    def test_lockdown_versions(self, bundle):
        assert bundle.lockdown_versions == {"17.1": 1}

    def test_fingerprint_counts(self, bundle):
        assert bundle.fingerprint_counts == {"dahua_camera": 2, "nokia_gateway": 1}

    def test_internal_only(self, bundle):
        assert bundle.internal_only == [(NET_B1, B1_INT, ("telnet",))]

    def test_unknown_attribution(self):
        b = aggregate(CLASSIFIED, [], [], LongestPrefixMap())
        assert b.country_counts == {"unknown": [3, 3]}
        assert b.asn_counts == {"unknown": [3, 3]}
        assert b.asn_names == {}

    def test_input_order_never_matters(self, bundle):
        rng = random.Random(7)
        for _ in range(5):
            classified = CLASSIFIED[:]
            grabs = GRABS[:]
            hits = HITS[:]
            rng.shuffle(classified)
            rng.shuffle(grabs)
            rng.shuffle(hits)
            assert aggregate(classified, grabs, hits, build_lpm(), seed_total=7) == bundle

    def test_conservation(self, bundle):
        for col in (0, 1):
            total = (bundle.total_internal, bundle.total_external)[col]
            assert sum(v[col] for v in bundle.country_counts.values()) == total
            assert sum(v[col] for v in bundle.asn_counts.values()) == total
            assert sum(v[col] for v in bundle.yield_stats.values()) == total
        assert sum(bundle.iid_hist.values()) == bundle.total_internal
        assert sum(bundle.delta_hist.values()) == bundle.total_pairs

    def test_empty_campaign(self):
        b = aggregate([], [], [], LongestPrefixMap())
        assert b.total_internal == 0 and b.total_external == 0
        assert b.country_counts == {}
        assert b.delta_hist == {} and b.total_pairs == 0
        assert b.iid_hist == {n: 0 for n in range(1, 11)}
        assert all(v == [0, 0] for v in b.protocol_split.values())
        assert b.internal_only == []


class TestYieldCdf:
    def test_exact_rows(self, bundle):
        # Two /48s with [2,2] and [1,1] responsive addresses.
        assert yield_cdf(bundle) == [
            (0, 0.0, 0.0),
            (1, 0.5, 0.5),
            (2, 1.0, 1.0),
        ]

    def test_monotone_and_terminal(self, bundle):
        rows = yield_cdf(bundle)
        for (_, i0, e0), (_, i1, e1) in zip(rows, rows[1:]):
            assert i1 >= i0 and e1 >= e0
        assert rows[-1][1] == 1.0 and rows[-1][2] == 1.0

    def test_empty(self):
        assert yield_cdf(aggregate([], [], [], LongestPrefixMap())) == []


class TestInternalOnly:
    def test_external_response_suppresses_net(self):
        assert internal_only_exposures(
            [internal(NET_A1, A1_INT1, 4), external(NET_A1, A1_WAN, 3)],
            [hit("2001:db8:a:100::1", "telnet"), hit("3fff:a:0:1::7", "http")],
        ) == []

    def test_failed_external_grabs_do_not_suppress(self):
        out = internal_only_exposures(
            [internal(NET_B1, B1_INT, 6), external(NET_B1, B1_WAN, 6)],
            [
                hit("2001:db8:b:300::a", "telnet"),
                GrabRecord(address="3fff:b:0:3::7", service="http", outcome=OUTCOME_TIMEOUT),
            ],
        )
        assert out == [(NET_B1, B1_INT, ("telnet",))]

    def test_quiet_internal_addresses_not_listed(self):
        assert internal_only_exposures(
            [internal(NET_B1, B1_INT, 6), external(NET_B1, B1_WAN, 6)], []
        ) == []

    def test_service_filter(self):
        classified = [internal(NET_B1, B1_INT, 6), external(NET_B1, B1_WAN, 6)]
        grabs = [hit("2001:db8:b:300::a", "telnet"), hit("2001:db8:b:300::a", "mqtt")]
        both = internal_only_exposures(classified, grabs)
        assert both == [(NET_B1, B1_INT, ("mqtt", "telnet"))]
        assert internal_only_exposures(classified, grabs, service="telnet") == both
        assert internal_only_exposures(classified, grabs, service="http") == []

    def test_net_without_external_counts(self):
        # No outside responder was ever seen: nothing to suppress on.
        out = internal_only_exposures(
            [internal(NET_A2, parse_address("2001:db8:a:200::3"), 2)],
            [hit("2001:db8:a:200::3", "ssh")],
        )
        assert out == [(NET_A2, parse_address("2001:db8:a:200::3"), ("ssh",))]


EXPECTED_FILES = [
    "summary.csv",
    "country_split.csv",
    "asn_split.csv",
    "yield_cdf.csv",
    "iid_hist.csv",
    "delta_hist.csv",
    "protocol_split.csv",
    "distinct_ports.csv",
    "internal_only.csv",
    "lockdown_versions.csv",
    "fingerprints_summary.csv",
]


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestEmit:
    def test_writes_all_tables(self, bundle, tmp_path):
        written = emit(bundle, str(tmp_path))
        assert written == EXPECTED_FILES
        for name in written:
            assert (tmp_path / name).is_file()

    def test_summary_contents(self, bundle, tmp_path):
        emit(bundle, str(tmp_path))
        rows = read_rows(tmp_path / "summary.csv")
        assert rows[0] == ["key", "value"]
        values = dict(rows[1:])
        assert values == {
            "internal_addresses": "3",
            "external_addresses": "3",
            "responsive_48s": "2",
            "seed_total": "7",
            "delta_pairs": "3",
            "internal_only_exposures": "1",
        }

    def test_country_rows_sorted(self, bundle, tmp_path):
        emit(bundle, str(tmp_path))
        assert read_rows(tmp_path / "country_split.csv") == [
            ["country", "internal", "external"],
            ["de", "2", "2"],
            ["fr", "1", "1"],
        ]

    def test_asn_rows(self, bundle, tmp_path):
        emit(bundle, str(tmp_path))
        assert read_rows(tmp_path / "asn_split.csv") == [
            ["asn", "as_name", "internal", "external"],
            ["64500", "Alpha Net", "2", "2"],
            ["64501", "Beta Net", "1", "1"],
        ]

    def test_cdf_fixed_point_format(self, bundle, tmp_path):
        emit(bundle, str(tmp_path))
        rows = read_rows(tmp_path / "yield_cdf.csv")
        assert rows[1] == ["0", "0.000000", "0.000000"]
        assert rows[-1] == ["2", "1.000000", "1.000000"]

    def test_internal_only_row(self, bundle, tmp_path):
        emit(bundle, str(tmp_path))
        assert read_rows(tmp_path / "internal_only.csv") == [
            ["prefix56", "address", "services"],
            ["2001:db8:b:300::/56", "2001:db8:b:300::a", "telnet"],
        ]

    def test_empty_bundle_emits_headers(self, tmp_path):
        written = emit(aggregate([], [], [], LongestPrefixMap()), str(tmp_path))
        assert written == EXPECTED_FILES
        assert read_rows(tmp_path / "yield_cdf.csv") == [
            ["addresses", "internal_cdf", "external_cdf"]
        ]
        iid_rows = read_rows(tmp_path / "iid_hist.csv")
        assert iid_rows[0] == ["iid", "count"]
        assert [r[0] for r in iid_rows[1:]] == [str(n) for n in range(1, 11)]
        assert all(r[1] == "0" for r in iid_rows[1:])


class TestAsnGeoFile:
    def test_load(self, tmp_path):
        path = tmp_path / "asn_geo.csv"
        path.write_text(
            "# prefix,asn,as_name,country\n"
            "\n"
            "2001:db8:a::/48,64500,Alpha Net,de\n"
            "3fff::/20,64999,Carrier Core,de\n"
        )
        table = load_asn_geo(str(path))
        rec = table.lookup(parse_address("2001:db8:a:100::1"))
        assert rec == AsnGeoRecord(64500, "Alpha Net", "de")
        assert table.lookup(parse_address("3fff:a::1")).as_name == "Carrier Core"
        assert table.lookup(parse_address("2001:db8:b::1")) is None

    def test_malformed_row_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("2001:db8::/48,64500,No Country\n")
        with pytest.raises(ValueError):
            load_asn_geo(str(path))

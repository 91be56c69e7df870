"""Taxonomy loading, domain-type validation and class slicing."""

import numpy as np
import pytest

from conftest import make_checkin, write_taxonomy
from tastemap.errors import DataError, TaxonomyError
from tastemap.model import Area, class_slice, load_taxonomy


class TestLoadTaxonomy:
    def test_reference_file_class_sizes(self, ref_tax):
        assert ref_tax.class_count("Drink") == 21
        assert ref_tax.class_count("FastFood") == 27
        assert ref_tax.class_count("SlowFood") == 53
        assert ref_tax.m == 101

    def test_single_class_single_subcategory(self, tmp_path):
        tax = load_taxonomy(write_taxonomy(tmp_path / "t.txt", "Drink\tPub\n"))
        assert tax.m == 1
        assert tax.class_ids == ("Drink",)

    def test_excluded_name_is_dropped_and_unknown(self, ref_tax):
        assert "Restaurant" in ref_tax.excluded
        assert "Restaurant" not in ref_tax
        with pytest.raises(TaxonomyError):
            ref_tax.index_of("Restaurant")

    def test_exclusion_applies_to_listed_entries(self, tmp_path):
        text = "Drink\tPub\nFastFood\tRestaurant\nFastFood\tBakery\n!exclude\tRestaurant\n"
        tax = load_taxonomy(write_taxonomy(tmp_path / "t.txt", text))
        assert tax.m == 2
        assert "Restaurant" not in tax

    def test_duplicate_subcategory_rejected(self, tmp_path):
        text = "Drink\tPub\nFastFood\tPub\n"
        with pytest.raises(TaxonomyError, match="duplicate"):
            load_taxonomy(write_taxonomy(tmp_path / "t.txt", text))

    def test_empty_class_rejected(self, tmp_path):
        text = "Drink\tPub\nFastFood\tRestaurant\n!exclude\tRestaurant\n"
        with pytest.raises(TaxonomyError, match="no subcategories"):
            load_taxonomy(write_taxonomy(tmp_path / "t.txt", text))

    def test_unknown_class_id_rejected(self, tmp_path):
        with pytest.raises(TaxonomyError, match="unknown class id"):
            load_taxonomy(write_taxonomy(tmp_path / "t.txt", "Dessert\tPie\n"))

    def test_malformed_line_rejected(self, tmp_path):
        with pytest.raises(TaxonomyError, match="expected"):
            load_taxonomy(write_taxonomy(tmp_path / "t.txt", "Drink Pub\n"))

    def test_empty_file_rejected(self, tmp_path):
        with pytest.raises(TaxonomyError):
            load_taxonomy(write_taxonomy(tmp_path / "t.txt", "# nothing here\n"))

    def test_comments_and_blank_lines_skipped(self, tmp_path):
        text = "# header\n\nDrink\tPub\n  \nDrink\tBar\n"
        assert load_taxonomy(write_taxonomy(tmp_path / "t.txt", text)).m == 2

    def test_other_class_supported_for_full_taxonomies(self, tmp_path):
        text = "Drink\tPub\nOther\tShoe Store\nOther\tHotel\n"
        tax = load_taxonomy(write_taxonomy(tmp_path / "t.txt", text))
        assert tax.class_ids == ("Drink", "Other")
        assert tax.m == 3
        assert tax.class_of("Hotel") == "Other"


class TestClassSlice:
    def test_drink_slice_is_21_dim(self, ref_tax):
        vec = np.arange(ref_tax.m, dtype=float)
        assert class_slice(ref_tax, vec, "Drink").shape == (21,)

    def test_all_zero_vector_slices_to_zero(self, ref_tax):
        assert not class_slice(ref_tax, np.zeros(ref_tax.m), "SlowFood").any()

    def test_slowfood_bit_invisible_to_drink_slice(self, ref_tax):
        vec = np.zeros(ref_tax.m)
        vec[ref_tax.index_of("Steakhouse")] = 1.0
        drink = class_slice(ref_tax, vec, "Drink")
        assert drink.shape == (21,) and not drink.any()

    def test_unknown_class_rejected(self, toy_tax):
        with pytest.raises(TaxonomyError):
            class_slice(toy_tax, np.zeros(toy_tax.m), "Dessert")

    def test_wrong_length_rejected(self, toy_tax):
        with pytest.raises(DataError):
            class_slice(toy_tax, np.zeros(toy_tax.m + 1), "Drink")

    def test_slices_concatenate_to_full_vector(self, ref_tax, toy_tax):
        for tax in (ref_tax, toy_tax):
            vec = np.arange(tax.m, dtype=float)
            parts = [class_slice(tax, vec, c) for c in tax.class_ids]
            assert np.array_equal(np.concatenate(parts), vec)

    def test_m_consistent_with_class_counts(self, ref_tax):
        assert ref_tax.m == sum(ref_tax.class_count(c) for c in ref_tax.class_ids)


class TestCheckIn:
    def test_valid_checkin(self):
        c = make_checkin(lat=45.0, lon=-120.0)
        assert c.ts.hour == 12

    @pytest.mark.parametrize("lat,lon", [(91.0, 0.0), (-91.0, 0.0), (0.0, 181.0), (0.0, -181.0)])
    def test_out_of_range_coordinates(self, lat, lon):
        with pytest.raises(DataError):
            make_checkin(lat=lat, lon=lon)

    def test_offset_timestamp_rejected(self):
        with pytest.raises(DataError):
            make_checkin(ts="2024-04-16T12:00:00+02:00")


class TestArea:
    def test_contains_uses_closed_edges_by_default(self):
        area = Area("c", "city", bbox=(0.0, 0.0, 1.0, 1.0))
        assert area.contains(1.0, 1.0) and area.contains(0.0, 0.0)

    def test_half_open_cell_excludes_max_edges(self):
        cell = Area("c:0:0", "grid_cell", bbox=(0.0, 0.0, 1.0, 1.0),
                    closed_max_lon=False, closed_max_lat=False)
        assert cell.contains(0.5, 0.5)
        assert not cell.contains(1.0, 0.5)
        assert not cell.contains(0.5, 1.0)

    def test_bad_kind_rejected(self):
        with pytest.raises(DataError):
            Area("x", "county")

    def test_inverted_bbox_rejected(self):
        with pytest.raises(DataError):
            Area("x", "city", bbox=(1.0, 0.0, 0.0, 1.0))

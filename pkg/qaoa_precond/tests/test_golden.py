import pytest


@pytest.fixture
def comparing(request):
    if request.config.getoption("--update-golden"):
        pytest.skip("reference values are being rewritten")


@pytest.mark.usefixtures("comparing")
class TestGoldenFixture:
    def test_missing_file_fails(self, golden):
        with pytest.raises(pytest.fail.Exception, match="--update-golden"):
            golden("no_such_reference", [1.0])

    def test_mismatch_fails(self, golden):
        with pytest.raises(AssertionError):
            golden("maxcut_5_expectation", 0.0)

    def test_shape_mismatch_fails(self, golden):
        with pytest.raises(AssertionError):
            golden("maxcut_3_qng_block_step", [0.0182, 0.3344, 0.0])

    def test_match(self, golden):
        golden("maxcut_3_qng_block_step", [0.018200404248594655, 0.3343541883218669])

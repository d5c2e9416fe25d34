import logging

from utils.ml_logging import KEYINFO_LEVEL_NUM, get_logger, log_function_call


class TestGetLogger:
    def test_keyinfo_sits_between_info_and_warning(self, caplog):
        logger = get_logger("rebalancing.tests")
        with caplog.at_level(logging.INFO, logger="rebalancing"):
            logger.keyinfo("milestone reached")
        record = caplog.records[-1]
        assert record.levelno == KEYINFO_LEVEL_NUM
        assert record.levelname == "KEYINFO"
        assert logging.INFO < KEYINFO_LEVEL_NUM < logging.WARNING

    def test_one_stream_handler_on_the_top_level_logger(self):
        get_logger("rebalancing.a")
        get_logger("rebalancing.b")
        root = logging.getLogger("rebalancing")
        assert sum(isinstance(h, logging.StreamHandler) for h in root.handlers) == 1
        assert not logging.getLogger("rebalancing.a").handlers

    def test_level_from_environment(self, monkeypatch):
        monkeypatch.setenv("REBALANCING_LOG_LEVEL", "warning")
        get_logger("envlevel.tests")
        assert logging.getLogger("envlevel").level == logging.WARNING


class TestLogFunctionCall:
    def test_records_point_at_the_wrapped_function(self, caplog):
        @log_function_call("rebalancing.tests")
        def double(x):
            return 2 * x

        with caplog.at_level(logging.INFO, logger="rebalancing"):
            assert double(4) == 8
        messages = [r.getMessage() for r in caplog.records]
        assert "Function double called" in messages
        assert any(m.startswith("Function double executed in") for m in messages)
        assert caplog.records[-1].func_name_override == "double"

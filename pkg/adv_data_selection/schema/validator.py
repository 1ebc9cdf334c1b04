"""
Run configuration validator.

This module validates raw configuration documents (parsed JSON merged with
command-line overrides) against the run configuration schema and checks that
every input file the dataset source names exists.
"""

from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from loguru import logger
from pydantic import ValidationError

from adv_data_selection.errors import ConfigError
from adv_data_selection.schema.run_config import CONFIG_SECTION_SCHEMAS, RunConfig


def validate_section(section: str, properties: Dict[str, Any]) -> Dict[str, Any]:
    """
    Validate one configuration section by name.

    Args:
        section: Section name (attack, eval_attack, policy, train, dataset, output, run)
        properties: Section properties

    Returns:
        Validated properties with defaults filled in

    Raises:
        ConfigError: If the section is unknown or validation fails
    """
    if section not in CONFIG_SECTION_SCHEMAS:
        raise ConfigError(f"Unknown config section: {section}")

    schema_model = CONFIG_SECTION_SCHEMAS[section]

    try:
        validated = schema_model(**properties)
        return validated.model_dump(mode="json")
    except ValidationError as e:
        raise ConfigError(f"Validation failed for {section}: {str(e)}")


class ConfigValidator:
    """
    Validator for run configurations.

    Args:
        check_paths: Whether dataset input files must exist
    """

    def __init__(self, check_paths: bool = True):
        self.check_paths = check_paths

    def validate_run_config(self, raw: Dict[str, Any]) -> RunConfig:
        """
        Validate a raw configuration document.

        Args:
            raw: Parsed configuration with overrides applied

        Returns:
            Validated run configuration

        Raises:
            ConfigError: If validation fails or an input file is missing
        """
        try:
            config = RunConfig.model_validate(raw)
        except ValidationError as e:
            logger.error(f"Run config validation error: {str(e)}")
            raise ConfigError(f"Invalid run configuration: {str(e)}")

        if self.check_paths:
            missing = [p for p in config.dataset.input_paths() if not Path(p).is_file()]
            if missing:
                logger.error(f"Dataset files not found: {missing}")
                raise ConfigError(f"Dataset files not found: {', '.join(missing)}")
        return config

    def validate_section(self, section: str, properties: Dict[str, Any]) -> Dict[str, Any]:
        """
        Validate a single section (see ``validate_section``).

        Raises:
            ConfigError: If the section is unknown or invalid
        """
        try:
            return validate_section(section, properties)
        except ConfigError as e:
            logger.error(f"Section validation error: {str(e)}")
            raise

    def check_run_config_compatibility(self, raw: Dict[str, Any]) -> Tuple[bool, Optional[str]]:
        """
        Check a raw configuration without raising.

        Returns:
            Tuple of (is_valid, error_message)
        """
        try:
            self.validate_run_config(raw)
            return True, None
        except ConfigError as e:
            return False, str(e)

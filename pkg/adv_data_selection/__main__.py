from adv_data_selection.cli import main

if __name__ == "__main__":
    raise SystemExit(main())

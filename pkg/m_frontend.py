# m_frontend.py
from stream_pipeline.data_package import DataPackage, DataPackageController, DataPackagePhase, DataPackageModule, Status
from stream_pipeline.module_classes import ExecutionModule, ModuleOptions

from backend import BackendSession
from errors import RadarBAError
import data
import logger

log = logger.get_logger()

class Frontend_Tracking(ExecutionModule):
    def __init__(self,
                    session: BackendSession,
                    timeout: float = 60.0
                ) -> None:
        super().__init__(ModuleOptions(
                                use_mutex=False,
                                timeout=timeout,
                            ),
                            name="Frontend-Module"
                        )
        self.session: BackendSession = session

    def execute(self, dp: DataPackage[data.RadarData], dpc: DataPackageController, dpp: DataPackagePhase, dpm: DataPackageModule) -> None:
        if not dp.data:
            raise Exception("No data found")

        try:
            self.session.track(dp.data)
        except RadarBAError as e:
            dp.data.error = e
            dpm.message = f"Frontend failed on frame {dp.data.frame.frame_id}: {e}"
            dpm.status = Status.EXIT
